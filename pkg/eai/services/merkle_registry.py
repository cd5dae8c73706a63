from __future__ import annotations

import hashlib
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from eth_utils import keccak

from eai.services.ingest import Address, AddressRole, load_address_list

logger = logging.getLogger(__name__)

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
DIGEST_SIZE = 32

HASHES: dict[str, Callable[[bytes], bytes]] = {
    "keccak256": lambda data: keccak(data),
    "sha256": lambda data: hashlib.sha256(data).digest(),
}


class EmptySet(ValueError):
    pass


class NotMember(LookupError):
    pass


class AlreadyMember(ValueError):
    pass


class RootMismatch(ValueError):
    pass


def hash_function(hash_name: str) -> Callable[[bytes], bytes]:
    try:
        return HASHES[hash_name]
    except KeyError as exc:
        raise ValueError(f"unsupported hash {hash_name!r}; expected one of {', '.join(HASHES)}") from exc


def leaf_hash(address: Address, hash_name: str = "keccak256") -> bytes:
    return hash_function(hash_name)(LEAF_PREFIX + address.raw)


def node_hash(left: bytes, right: bytes, hash_name: str = "keccak256") -> bytes:
    lo, hi = (left, right) if left <= right else (right, left)
    return hash_function(hash_name)(NODE_PREFIX + lo + hi)


@dataclass(frozen=True)
class MerkleProof:
    address: Address
    siblings: tuple[bytes, ...] = ()
    root: bytes | None = None

    @property
    def hash_operations(self) -> int:
        return 1 + len(self.siblings)

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "address": str(self.address),
            "siblings": ["0x" + sibling.hex() for sibling in self.siblings],
        }
        if self.root is not None:
            payload["root"] = "0x" + self.root.hex()
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> MerkleProof:
        root = payload.get("root")
        return cls(
            address=Address.parse(str(payload["address"])),
            siblings=tuple(_from_hex(item) for item in payload.get("siblings") or []),
            root=_from_hex(root) if root else None,
        )


@dataclass(frozen=True)
class MerkleRegistry:
    """Sorted-leaf hash tree; unpaired nodes are carried up a level unchanged."""

    leaves: tuple[Address, ...]
    levels: tuple[tuple[bytes, ...], ...] = field(repr=False)
    hash_name: str = "keccak256"

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def root_hex(self) -> str:
        return "0x" + self.root.hex()

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __len__(self) -> int:
        return len(self.leaves)

    def __contains__(self, address: object) -> bool:
        if not isinstance(address, (Address, str)):
            return False
        return self.index_of(address) is not None

    def index_of(self, address: Address | str) -> int | None:
        address = Address.coerce(address)
        position = bisect_left(self.leaves, address)
        if position < len(self.leaves) and self.leaves[position] == address:
            return position
        return None


def build_registry(addresses: Iterable[Address | str], hash_name: str = "keccak256") -> MerkleRegistry:
    leaves = tuple(sorted({Address.coerce(item) for item in addresses}))
    if not leaves:
        raise EmptySet("cannot build a registry from an empty address set")
    level = tuple(leaf_hash(address, hash_name) for address in leaves)
    levels = [level]
    while len(level) > 1:
        parents = []
        for index in range(0, len(level) - 1, 2):
            parents.append(node_hash(level[index], level[index + 1], hash_name))
        if len(level) % 2:
            parents.append(level[-1])
        level = tuple(parents)
        levels.append(level)
    registry = MerkleRegistry(leaves=leaves, levels=tuple(levels), hash_name=hash_name)
    logger.info(
        "merkle_registry_built leaves=%s depth=%s hash=%s root=%s",
        len(leaves),
        registry.depth,
        hash_name,
        registry.root_hex,
    )
    return registry


def prove(reg: MerkleRegistry, address: Address | str) -> MerkleProof:
    index = reg.index_of(address)
    if index is None:
        raise NotMember(f"address {address} is not in the registry")
    siblings = []
    for level in reg.levels[:-1]:
        sibling = index ^ 1
        if sibling < len(level):
            siblings.append(level[sibling])
        index //= 2
    return MerkleProof(address=reg.leaves[reg.index_of(address)], siblings=tuple(siblings), root=reg.root)


def verify(root: bytes | str, proof: MerkleProof, hash_name: str = "keccak256") -> bool:
    """Fold the leaf hash through the sibling path; malformed input yields False."""
    try:
        expected = _from_hex(root) if isinstance(root, str) else bytes(root)
        node = leaf_hash(Address.coerce(proof.address), hash_name)
        for sibling in proof.siblings:
            if len(sibling) != DIGEST_SIZE:
                return False
            node = node_hash(node, sibling, hash_name)
    except (TypeError, ValueError):
        return False
    return len(expected) == DIGEST_SIZE and node == expected


def update_registry(
    reg: MerkleRegistry,
    add: Iterable[Address | str] = (),
    remove: Iterable[Address | str] = (),
) -> MerkleRegistry:
    additions = {Address.coerce(item) for item in add}
    removals = {Address.coerce(item) for item in remove}
    current = set(reg.leaves)
    missing = sorted(removals - current)
    if missing:
        raise NotMember(f"cannot remove non-members: {', '.join(map(str, missing))}")
    present = sorted(additions & current)
    if present:
        raise AlreadyMember(f"cannot add existing members: {', '.join(map(str, present))}")
    updated = build_registry((current | additions) - removals, reg.hash_name)
    logger.info(
        "merkle_registry_updated added=%s removed=%s old_root=%s new_root=%s",
        len(additions),
        len(removals),
        reg.root_hex,
        updated.root_hex,
    )
    return updated


def save_registry(reg: MerkleRegistry, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    temp_path.write_text("".join(f"{address}\n" for address in reg.leaves), encoding="utf-8")
    temp_path.replace(path)
    root_path(path).write_text(f"{reg.root_hex}\n", encoding="utf-8")
    logger.info("merkle_registry_saved path=%s leaves=%s", path, len(reg))
    return path


def load_registry(path: Path, hash_name: str = "keccak256") -> MerkleRegistry:
    path = Path(path)
    reg = build_registry(load_address_list(path, AddressRole.EAI), hash_name)
    sidecar = root_path(path)
    if sidecar.exists():
        stored = sidecar.read_text(encoding="utf-8").strip().lower()
        if stored != reg.root_hex:
            raise RootMismatch(f"{sidecar}: stored root {stored} does not match rebuilt root {reg.root_hex}")
    return reg


def root_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".root")


def _from_hex(value: str) -> bytes:
    text = str(value).strip()
    if text.startswith(("0x", "0X")):
        text = text[2:]
    return bytes.fromhex(text)
