from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from eai.services.graph import TransactionGraph
from eai.services.ingest import Address, AddressList

logger = logging.getLogger(__name__)

_MAX_HOPS_LIMIT = 1000


class NoSources(ValueError):
    pass


class UnknownAddress(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Per-node EAI distance; the value ``beyond`` (max_hops + 1) stands for Beyond."""

    graph: TransactionGraph
    distances: np.ndarray
    max_hops: int
    source_count: int

    @property
    def beyond(self) -> int:
        return self.max_hops + 1

    def is_beyond(self, distance: int) -> bool:
        return distance > self.max_hops

    def label(self, distance: int) -> str:
        return f"{self.max_hops}+" if self.is_beyond(distance) else str(distance)

    def labels(self) -> list[str]:
        return [str(hop) for hop in range(self.max_hops + 1)] + [f"{self.max_hops}+"]

    def distance(self, address: Address | str) -> int:
        node = self.graph.node_id(address)
        if node is None:
            raise UnknownAddress(f"address {address} is not in the graph")
        return int(self.distances[node])

    def distance_or_beyond(self, address: Address | str) -> int:
        node = self.graph.node_id(address)
        return self.beyond if node is None else int(self.distances[node])

    def is_eai(self, address: Address | str) -> bool:
        return self.distance(address) <= 1

    def within_hops_of_eai(self, address: Address | str, k: int) -> bool:
        if k < 0:
            raise ValueError("k must be >= 0")
        distance = self.distance(address)
        return not self.is_beyond(distance) and distance <= 1 + k

    def txn_distance(self, sender: Address | str, receiver: Address | str) -> int:
        return min(self.distance(sender), self.distance(receiver))

    def txn_is_eai(self, sender: Address | str, receiver: Address | str) -> bool:
        return self.is_eai(sender) or self.is_eai(receiver)

    def histogram(self, nodes: Iterable[int] | np.ndarray | None = None) -> list[int]:
        if nodes is None:
            values = self.distances
        else:
            index = nodes if isinstance(nodes, np.ndarray) else np.fromiter(nodes, dtype=np.int64)
            values = self.distances[index.astype(np.int64)]
        counts = np.bincount(values.astype(np.int64), minlength=self.max_hops + 2)
        return [int(count) for count in counts[: self.max_hops + 2]]

    def eai_addresses(self) -> list[Address]:
        return [self.graph.address(int(node)) for node in np.flatnonzero(self.distances <= 1)]

    def coverage(self) -> float:
        if not self.graph.node_count:
            return 0.0
        return float(np.count_nonzero(self.distances <= self.max_hops)) / self.graph.node_count


def compute_distances(
    g: TransactionGraph,
    exchanges: AddressList | Iterable[Address],
    exclusions: AddressList | Iterable[Address] | None = None,
    max_hops: int = 5,
    *,
    threads: int = 1,
) -> DistanceMap:
    """Capped multi-source BFS following transfer direction (exchange -> recipient)."""
    if not 1 <= max_hops <= _MAX_HOPS_LIMIT:
        raise ValueError(f"max_hops must be in 1..{_MAX_HOPS_LIMIT}")
    excluded = {Address.coerce(item) for item in (exclusions or ())}
    source_ids: set[int] = set()
    missing = 0
    for address in exchanges:
        address = Address.coerce(address)
        if address in excluded:
            continue
        node = g.node_id(address)
        if node is None:
            missing += 1
            continue
        source_ids.add(node)
    if missing:
        logger.warning("exchange_addresses_absent count=%s", missing)
    if not source_ids:
        raise NoSources("no exchange address remains after exclusions and graph lookup")

    beyond = max_hops + 1
    distances = np.full(g.node_count, beyond, dtype=np.int16)
    frontier = np.array(sorted(source_ids), dtype=np.int64)
    distances[frontier] = 0
    offsets = g.offsets.astype(np.int64)
    targets = g.targets
    workers = _resolve_threads(threads)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for level in range(1, max_hops + 1):
            if workers > 1 and frontier.shape[0] >= 4 * workers:
                chunks = np.array_split(frontier, workers)
                expanded = list(pool.map(lambda chunk: _expand(chunk, offsets, targets), chunks))
                reached = np.concatenate(expanded) if expanded else frontier[:0]
            else:
                reached = _expand(frontier, offsets, targets)
            reached = reached[distances[reached] == beyond]
            frontier = np.unique(reached)
            if not frontier.shape[0]:
                break
            distances[frontier] = level

    distances.flags.writeable = False
    dm = DistanceMap(graph=g, distances=distances, max_hops=max_hops, source_count=len(source_ids))
    logger.info(
        "distances_computed nodes=%s sources=%s max_hops=%s eai=%s beyond=%s threads=%s",
        g.node_count,
        len(source_ids),
        max_hops,
        int(np.count_nonzero(distances <= 1)),
        int(np.count_nonzero(distances == beyond)),
        workers,
    )
    return dm


def is_eai(dm: DistanceMap, v: Address | str) -> bool:
    return dm.is_eai(v)


def within_hops_of_eai(dm: DistanceMap, v: Address | str, k: int) -> bool:
    return dm.within_hops_of_eai(v, k)


def txn_distance(dm: DistanceMap, sender: Address | str, receiver: Address | str) -> int:
    return dm.txn_distance(sender, receiver)


def txn_is_eai(dm: DistanceMap, sender: Address | str, receiver: Address | str) -> bool:
    return dm.txn_is_eai(sender, receiver)


def write_distances_csv(dm: DistanceMap, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["address", "distance"])
    for node in range(dm.graph.node_count):
        writer.writerow([str(dm.graph.address(node)), dm.label(int(dm.distances[node]))])


def read_distances_csv(stream: IO[str], g: TransactionGraph, max_hops: int = 5) -> DistanceMap:
    beyond = max_hops + 1
    distances = np.full(g.node_count, beyond, dtype=np.int16)
    reader = csv.DictReader(io.StringIO(stream.read()))
    for row in reader:
        node = g.node_id(row["address"])
        if node is None:
            raise UnknownAddress(f"line {reader.line_num}: address {row['address']} is not in the graph")
        label = row["distance"].strip()
        distances[node] = beyond if label.endswith("+") else int(label)
    distances.flags.writeable = False
    return DistanceMap(
        graph=g,
        distances=distances,
        max_hops=max_hops,
        source_count=int(np.count_nonzero(distances == 0)),
    )


def _expand(frontier: np.ndarray, offsets: np.ndarray, targets: np.ndarray) -> np.ndarray:
    starts = offsets[frontier]
    counts = offsets[frontier + 1] - starts
    total = int(counts.sum())
    if not total:
        return np.zeros(0, dtype=np.int64)
    # positions of every out-edge of the frontier, concatenated
    bases = np.repeat(starts - (np.cumsum(counts) - counts), counts)
    positions = bases + np.arange(total, dtype=np.int64)
    return targets[positions].astype(np.int64)


def _resolve_threads(threads: int) -> int:
    if threads and threads > 0:
        return threads
    return os.cpu_count() or 1
