from __future__ import annotations

import os
import time

import numpy as np
import pytest

from eai.services.graph import build_graph_from_arrays
from eai.services.ingest import Address
from eai.services.proximity import compute_distances

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.environ.get("EAI_RUN_SLOW") != "1", reason="set EAI_RUN_SLOW=1 to run scale checks"),
]

NODES = 2_000_000
EDGES = 10_000_000


def _address_table(count: int) -> np.ndarray:
    table = np.zeros((count, 20), dtype=np.uint8)
    table[:, 16:] = np.arange(count, dtype=">u4").view(np.uint8).reshape(-1, 4)
    return table


def test_synthetic_graph_bfs() -> None:
    rng = np.random.default_rng(7)
    table = _address_table(NODES)
    src = rng.integers(0, NODES, EDGES, dtype=np.int64)
    dst = rng.integers(0, NODES, EDGES, dtype=np.int64)
    amounts = rng.integers(1, 1_000_000_000, EDGES, dtype=np.uint64)

    started = time.perf_counter()
    g = build_graph_from_arrays(table, src, dst, amounts)
    exchanges = [Address(table[node].tobytes()) for node in rng.choice(NODES, 50, replace=False)]
    dm = compute_distances(g, exchanges, threads=4)
    elapsed = time.perf_counter() - started

    histogram = dm.histogram()
    assert sum(histogram) == NODES
    assert histogram[0] == 50
    assert g.edge_count <= EDGES
    assert elapsed < 60

    # every finite distance is one more than its best in-neighbour, capped
    offsets = g.offsets.astype(np.int64)
    heads = np.repeat(np.arange(NODES, dtype=np.int64), np.diff(offsets))
    tails = g.targets.astype(np.int64)
    distances = dm.distances.astype(np.int64)
    best = np.full(NODES, dm.beyond, dtype=np.int64)
    np.minimum.at(best, tails, np.minimum(distances[heads] + 1, dm.beyond))
    best[distances == 0] = 0
    assert np.array_equal(best, distances)
