from __future__ import annotations

import logging
import os
import secrets
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519
from eth_utils import keccak

from eai.services.ingest import Address

logger = logging.getLogger(__name__)

DOMAIN_TAG = b"EAI-ATTEST-V1"
SCHEME = "ed25519"
SEED_SIZE = 32
_U64_MAX = (1 << 64) - 1


class AttestationStatus(str, Enum):
    VALID = "valid"
    EXPIRED = "expired"
    BAD_SIGNATURE = "bad_signature"


class SignerIdentity:
    """Ed25519 key pair held by the off-chain registry operator."""

    def __init__(self, private_key: ed25519.Ed25519PrivateKey) -> None:
        self._private_key = private_key
        self._public_key = private_key.public_key()

    @classmethod
    def generate(cls) -> SignerIdentity:
        return cls(ed25519.Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> SignerIdentity:
        if len(seed) != SEED_SIZE:
            raise ValueError(f"signer seed must be {SEED_SIZE} bytes, got {len(seed)}")
        return cls(ed25519.Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def load(cls, path: Path) -> SignerIdentity:
        path = Path(path)
        text = path.read_text(encoding="utf-8").strip()
        try:
            seed = bytes.fromhex(text.removeprefix("0x"))
        except ValueError as exc:
            raise ValueError(f"{path}: signer key is not hex") from exc
        return cls.from_seed(seed)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(self.seed.hex() + "\n")
        os.chmod(path, 0o600)
        logger.info("signer_key_saved path=%s fingerprint=%s", path, self.fingerprint)
        return path

    @property
    def seed(self) -> bytes:
        return self._private_key.private_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PrivateFormat.Raw,
            encryption_algorithm=serialization.NoEncryption(),
        )

    @property
    def public_key(self) -> bytes:
        return public_key_bytes(self._public_key)

    @property
    def public_key_hex(self) -> str:
        return self.public_key.hex()

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._private_key.sign(message)


@dataclass(frozen=True)
class Attestation:
    address: Address
    is_eai: bool
    expires_at: int
    nonce: int
    signature: bytes
    scheme: str = SCHEME

    @property
    def digest(self) -> bytes:
        return attestation_digest(self.address, self.is_eai, self.expires_at, self.nonce)

    def to_dict(self) -> dict[str, Any]:
        return {
            "address": str(self.address),
            "is_eai": self.is_eai,
            "expires_at": self.expires_at,
            "nonce": self.nonce,
            "scheme": self.scheme,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> Attestation:
        scheme = str(payload.get("scheme", SCHEME))
        if scheme != SCHEME:
            raise ValueError(f"unsupported attestation scheme {scheme!r}")
        is_eai = payload["is_eai"]
        if not isinstance(is_eai, bool):
            raise ValueError(f"is_eai must be a JSON boolean, got {is_eai!r}")
        return cls(
            address=Address.parse(str(payload["address"])),
            is_eai=is_eai,
            expires_at=int(payload["expires_at"]),
            nonce=int(payload["nonce"]),
            signature=bytes.fromhex(str(payload["signature"]).removeprefix("0x")),
            scheme=scheme,
        )


@dataclass(frozen=True)
class TransferCheck:
    sender: AttestationStatus
    receiver: AttestationStatus
    involves_eai: bool

    @property
    def both_valid(self) -> bool:
        return self.sender is AttestationStatus.VALID and self.receiver is AttestationStatus.VALID


def attestation_digest(address: Address, is_eai: bool, expires_at: int, nonce: int) -> bytes:
    if not 0 <= expires_at <= _U64_MAX or not 0 <= nonce <= _U64_MAX:
        raise ValueError("expires_at and nonce must fit in 64 unsigned bits")
    return keccak(
        DOMAIN_TAG
        + Address.coerce(address).raw
        + (b"\x01" if is_eai else b"\x00")
        + expires_at.to_bytes(8, "big")
        + nonce.to_bytes(8, "big")
    )


def sign_attestation(
    signer: SignerIdentity,
    address: Address | str,
    is_eai: bool,
    ttl_seconds: int,
    nonce: int | None = None,
    *,
    now: int | None = None,
) -> Attestation:
    if ttl_seconds <= 0:
        raise ValueError("ttl_seconds must be > 0")
    address = Address.coerce(address)
    issued_at = int(time.time()) if now is None else int(now)
    nonce = secrets.randbits(64) if nonce is None else int(nonce)
    expires_at = issued_at + int(ttl_seconds)
    digest = attestation_digest(address, is_eai, expires_at, nonce)
    attestation = Attestation(
        address=address,
        is_eai=bool(is_eai),
        expires_at=expires_at,
        nonce=nonce,
        signature=signer.sign(digest),
    )
    logger.debug(
        "attestation_signed address=%s is_eai=%s expires_at=%s signer=%s",
        address,
        is_eai,
        expires_at,
        signer.fingerprint,
    )
    return attestation


def verify_attestation(
    public_key: bytes | str | ed25519.Ed25519PublicKey,
    att: Attestation,
    now: int | None = None,
) -> AttestationStatus:
    now = int(time.time()) if now is None else int(now)
    try:
        key = _public_key(public_key)
        if att.scheme != SCHEME:
            return AttestationStatus.BAD_SIGNATURE
        key.verify(att.signature, att.digest)
    except (InvalidSignature, ValueError, TypeError):
        return AttestationStatus.BAD_SIGNATURE
    if now >= att.expires_at:
        return AttestationStatus.EXPIRED
    return AttestationStatus.VALID


def check_transfer(
    public_key: bytes | str | ed25519.Ed25519PublicKey,
    sender_att: Attestation,
    receiver_att: Attestation,
    now: int | None = None,
) -> TransferCheck:
    sender = verify_attestation(public_key, sender_att, now)
    receiver = verify_attestation(public_key, receiver_att, now)
    involves_eai = (sender is AttestationStatus.VALID and sender_att.is_eai) or (
        receiver is AttestationStatus.VALID and receiver_att.is_eai
    )
    return TransferCheck(sender=sender, receiver=receiver, involves_eai=involves_eai)


def public_key_bytes(key: ed25519.Ed25519PublicKey) -> bytes:
    return key.public_bytes(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


def fingerprint(public_key: bytes) -> str:
    return keccak(public_key)[:8].hex()


def _public_key(value: bytes | str | ed25519.Ed25519PublicKey) -> ed25519.Ed25519PublicKey:
    if isinstance(value, ed25519.Ed25519PublicKey):
        return value
    if isinstance(value, str):
        value = bytes.fromhex(value.strip().removeprefix("0x"))
    return ed25519.Ed25519PublicKey.from_public_bytes(value)
