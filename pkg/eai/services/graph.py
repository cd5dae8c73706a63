from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from decimal import Decimal
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from eai.services.ingest import Address, TransferRecord, format_usd, parse_usd

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"EAIG1"
ID_WIDTHS = {16: np.dtype("<u2"), 32: np.dtype("<u4"), 64: np.dtype("<u8")}
_HEADER = struct.Struct("<BQQ")
_U64 = np.dtype("<u8")


class CapacityExceeded(ValueError):
    pass


class OutOfRange(IndexError):
    pass


class GraphCacheError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeThreshold:
    min_micro: int = 10 * 1_000_000

    def __post_init__(self) -> None:
        if self.min_micro < 0:
            raise ValueError("edge threshold must be >= 0")

    @classmethod
    def usd(cls, value: Decimal | str | int) -> EdgeThreshold:
        return cls(parse_usd(str(value)))

    @property
    def min_usd(self) -> Decimal:
        return Decimal(self.min_micro).scaleb(-6)


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    total_volume_micro: int

    @property
    def total_volume_usd(self) -> Decimal:
        return Decimal(self.total_volume_micro).scaleb(-6)

    def as_dict(self) -> dict[str, object]:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "total_volume_usd": format_usd(self.total_volume_micro),
        }


class TransactionGraph:
    """Immutable CSR transfer graph; node ids are dense and assigned in first-appearance order."""

    def __init__(
        self,
        address_table: np.ndarray,
        offsets: np.ndarray,
        targets: np.ndarray,
        totals: np.ndarray,
        id_width: int = 32,
    ) -> None:
        if id_width not in ID_WIDTHS:
            raise ValueError(f"unsupported id width {id_width}")
        self.id_width = id_width
        self.address_table = _frozen(np.ascontiguousarray(address_table, dtype=np.uint8).reshape(-1, 20))
        self.offsets = _frozen(np.ascontiguousarray(offsets, dtype=_U64))
        self.targets = _frozen(np.ascontiguousarray(targets, dtype=ID_WIDTHS[id_width]))
        self.totals = _frozen(np.ascontiguousarray(totals, dtype=_U64))
        if self.offsets.shape[0] != self.node_count + 1:
            raise ValueError("offsets length must be node_count + 1")
        if self.targets.shape[0] != self.totals.shape[0] or int(self.offsets[-1]) != self.edge_count:
            raise ValueError("targets, totals and offsets disagree on edge count")
        if int(self.offsets[0]) != 0 or bool(np.any(np.diff(self.offsets.astype(np.int64)) < 0)):
            raise ValueError("offsets must start at 0 and never decrease")
        if self.edge_count and int(self.targets.max()) >= self.node_count:
            raise ValueError("edge target outside the node range")

    @property
    def node_count(self) -> int:
        return int(self.address_table.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.targets.shape[0])

    def __len__(self) -> int:
        return self.node_count

    def address(self, node: int) -> Address:
        self._check_node(node)
        return Address(self.address_table[node].tobytes())

    def node_id(self, address: Address | str) -> int | None:
        return self._index.get(Address.coerce(address).raw)

    def __contains__(self, address: object) -> bool:
        if not isinstance(address, (Address, str)):
            return False
        return self.node_id(address) is not None

    def neighbors(self, node: int) -> np.ndarray:
        self._check_node(node)
        return self.targets[int(self.offsets[node]) : int(self.offsets[node + 1])]

    def edge_total(self, source: int, target: int) -> int:
        """Aggregated micro-USD on source->target, 0 when the edge is absent."""
        row = self.neighbors(source)
        self._check_node(target)
        position = int(np.searchsorted(row, target))
        if position < row.shape[0] and int(row[position]) == target:
            return int(self.totals[int(self.offsets[source]) + position])
        return 0

    def reverse_neighbors(self, node: int) -> np.ndarray:
        self._check_node(node)
        offsets, sources = self._reverse
        return sources[int(offsets[node]) : int(offsets[node + 1])]

    def edges(self) -> Iterable[tuple[int, int, int]]:
        for node in range(self.node_count):
            start, end = int(self.offsets[node]), int(self.offsets[node + 1])
            for position in range(start, end):
                yield node, int(self.targets[position]), int(self.totals[position])

    def stats(self) -> GraphStats:
        return graph_stats(self)

    @cached_property
    def _index(self) -> dict[bytes, int]:
        blob = self.address_table.tobytes()
        return {blob[i * 20 : (i + 1) * 20]: i for i in range(self.node_count)}

    @cached_property
    def _reverse(self) -> tuple[np.ndarray, np.ndarray]:
        sources = np.repeat(
            np.arange(self.node_count, dtype=np.int64),
            np.diff(self.offsets).astype(np.int64),
        )
        order = np.argsort(self.targets, kind="stable")
        counts = np.bincount(self.targets.astype(np.int64), minlength=self.node_count)
        offsets = np.zeros(self.node_count + 1, dtype=_U64)
        offsets[1:] = np.cumsum(counts)
        return _frozen(offsets), _frozen(sources[order].astype(ID_WIDTHS[self.id_width]))

    def _check_node(self, node: int) -> None:
        if not 0 <= int(node) < self.node_count:
            raise OutOfRange(f"node id {node} out of range 0..{self.node_count - 1}")


def build_graph(
    records: Iterable[TransferRecord],
    threshold: EdgeThreshold | None = None,
    direct_only: bool = False,
    *,
    tokens: set[str] | None = None,
    id_width: int = 32,
) -> TransactionGraph:
    ids: dict[bytes, int] = {}
    src: list[int] = []
    dst: list[int] = []
    amounts: list[int] = []
    wanted = {token.upper() for token in tokens} if tokens else None
    for record in records:
        if direct_only and not record.direct:
            continue
        if wanted is not None and record.token.upper() not in wanted:
            continue
        src.append(ids.setdefault(record.sender.raw, len(ids)))
        dst.append(ids.setdefault(record.receiver.raw, len(ids)))
        amounts.append(record.amount_micro)

    table = np.frombuffer(b"".join(ids), dtype=np.uint8).reshape(-1, 20)
    return build_graph_from_arrays(
        table,
        np.asarray(src, dtype=np.int64),
        np.asarray(dst, dtype=np.int64),
        np.asarray(amounts, dtype=_U64),
        threshold,
        id_width=id_width,
    )


def build_graph_from_arrays(
    address_table: np.ndarray | Sequence[Address],
    src: np.ndarray,
    dst: np.ndarray,
    amounts_micro: np.ndarray,
    threshold: EdgeThreshold | None = None,
    *,
    id_width: int = 32,
) -> TransactionGraph:
    """Aggregate per ordered pair, then keep pairs whose total meets the threshold."""
    threshold = threshold or EdgeThreshold()
    if id_width not in ID_WIDTHS:
        raise ValueError(f"unsupported id width {id_width}")
    if not isinstance(address_table, np.ndarray):
        address_table = np.frombuffer(
            b"".join(address.raw for address in address_table), dtype=np.uint8
        ).reshape(-1, 20)
    node_count = int(address_table.shape[0])
    capacity = 1 << id_width
    if node_count > capacity:
        raise CapacityExceeded(f"{node_count} nodes exceed {id_width}-bit id space")

    src = np.asarray(src, dtype=np.uint64)
    dst = np.asarray(dst, dtype=np.uint64)
    amounts = np.asarray(amounts_micro, dtype=_U64)
    keep = src != dst
    src, dst, amounts = src[keep], dst[keep], amounts[keep]

    if src.shape[0]:
        keys = src * np.uint64(max(node_count, 1)) + dst
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        starts = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
        pair_totals = np.add.reduceat(amounts[order], starts)
        pair_keys = keys[starts]
        present = pair_totals >= np.uint64(threshold.min_micro)
        pair_keys, pair_totals = pair_keys[present], pair_totals[present]
    else:
        pair_keys = np.zeros(0, dtype=np.uint64)
        pair_totals = np.zeros(0, dtype=_U64)

    edge_count = int(pair_keys.shape[0])
    if edge_count > capacity:
        raise CapacityExceeded(f"{edge_count} edges exceed {id_width}-bit id space")

    width = np.uint64(max(node_count, 1))
    sources = (pair_keys // width).astype(np.int64)
    targets = pair_keys % width
    offsets = np.zeros(node_count + 1, dtype=_U64)
    offsets[1:] = np.cumsum(np.bincount(sources, minlength=node_count))

    graph = TransactionGraph(address_table, offsets, targets, pair_totals, id_width=id_width)
    logger.info(
        "graph_built nodes=%s edges=%s threshold_usd=%s id_width=%s",
        graph.node_count,
        graph.edge_count,
        format_usd(threshold.min_micro),
        id_width,
    )
    return graph


def neighbors(g: TransactionGraph, v: int) -> list[int]:
    return [int(node) for node in g.neighbors(v)]


def graph_stats(g: TransactionGraph) -> GraphStats:
    return GraphStats(
        node_count=g.node_count,
        edge_count=g.edge_count,
        total_volume_micro=int(g.totals.sum(dtype=_U64)) if g.edge_count else 0,
    )


def save_graph(g: TransactionGraph, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    with temp_path.open("wb") as handle:
        handle.write(CACHE_MAGIC)
        handle.write(_HEADER.pack(g.id_width, g.node_count, g.edge_count))
        handle.write(g.address_table.tobytes())
        handle.write(g.offsets.astype(_U64).tobytes())
        handle.write(g.targets.astype(ID_WIDTHS[g.id_width]).tobytes())
        handle.write(g.totals.astype(_U64).tobytes())
    temp_path.replace(path)
    logger.info("graph_cache_written path=%s nodes=%s edges=%s", path, g.node_count, g.edge_count)


def load_graph(path: Path) -> TransactionGraph:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(CACHE_MAGIC):
        raise GraphCacheError(f"{path}: not an EAIG1 graph cache")
    cursor = len(CACHE_MAGIC)
    try:
        id_width, node_count, edge_count = _HEADER.unpack_from(data, cursor)
    except struct.error as exc:
        raise GraphCacheError(f"{path}: truncated header") from exc
    cursor += _HEADER.size
    if id_width not in ID_WIDTHS:
        raise GraphCacheError(f"{path}: unsupported id width {id_width}")
    id_dtype = ID_WIDTHS[id_width]
    expected = cursor + node_count * 20 + (node_count + 1) * 8 + edge_count * (id_dtype.itemsize + 8)
    if len(data) != expected:
        raise GraphCacheError(f"{path}: expected {expected} bytes, found {len(data)}")

    table = np.frombuffer(data, dtype=np.uint8, count=node_count * 20, offset=cursor)
    cursor += node_count * 20
    offsets = np.frombuffer(data, dtype=_U64, count=node_count + 1, offset=cursor)
    cursor += (node_count + 1) * 8
    targets = np.frombuffer(data, dtype=id_dtype, count=edge_count, offset=cursor)
    cursor += edge_count * id_dtype.itemsize
    totals = np.frombuffer(data, dtype=_U64, count=edge_count, offset=cursor)
    try:
        graph = TransactionGraph(table, offsets, targets, totals, id_width=id_width)
    except ValueError as exc:
        raise GraphCacheError(f"{path}: {exc}") from exc
    logger.info("graph_cache_loaded path=%s nodes=%s edges=%s", path, node_count, edge_count)
    return graph


def _frozen(array: np.ndarray) -> np.ndarray:
    array = array.view()
    array.flags.writeable = False
    return array
