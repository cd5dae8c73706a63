from __future__ import annotations

import io
from collections import deque

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import addr
from eai.services.graph import EdgeThreshold, build_graph, build_graph_from_arrays
from eai.services.ingest import Address, AddressList
from eai.services.proximity import (
    NoSources,
    UnknownAddress,
    compute_distances,
    is_eai,
    read_distances_csv,
    txn_distance,
    txn_is_eai,
    within_hops_of_eai,
    write_distances_csv,
)

PROPERTY_SETTINGS = settings(
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)


@pytest.fixture
def chain_dm(chain_records):
    g = build_graph(chain_records, EdgeThreshold(0))
    return compute_distances(g, AddressList.of("exchange", [addr("ee")]))


class TestDirectedDistances:
    def test_chain_distances(self, chain_dm) -> None:
        expected = {"ee": 0, "aa": 1, "bb": 2, "cc": 3, "dd": 4, "ff": 5}
        for suffix, distance in expected.items():
            assert chain_dm.distance(addr(suffix)) == distance

    def test_hop_cap_and_reverse_edge_are_beyond(self, chain_dm) -> None:
        assert chain_dm.is_beyond(chain_dm.distance(addr("99")))
        # X -> E exists but funds never flow from E to X
        assert chain_dm.is_beyond(chain_dm.distance(addr("88")))
        assert chain_dm.label(chain_dm.distance(addr("99"))) == "5+"

    def test_eai_predicates(self, chain_dm) -> None:
        assert is_eai(chain_dm, addr("ee"))
        assert is_eai(chain_dm, addr("aa"))
        assert not is_eai(chain_dm, addr("bb"))
        assert within_hops_of_eai(chain_dm, addr("bb"), 1)
        assert not within_hops_of_eai(chain_dm, addr("cc"), 1)
        with pytest.raises(ValueError):
            within_hops_of_eai(chain_dm, addr("bb"), -1)

    @pytest.mark.parametrize("k", [4, 5, 9])
    def test_beyond_is_never_within_hops(self, chain_dm, k: int) -> None:
        assert within_hops_of_eai(chain_dm, addr("ff"), k)
        assert not within_hops_of_eai(chain_dm, addr("99"), k)
        assert not within_hops_of_eai(chain_dm, addr("88"), k)

    def test_transaction_distance_is_min_of_parties(self, chain_dm) -> None:
        assert txn_distance(chain_dm, addr("cc"), addr("aa")) == 1
        assert txn_is_eai(chain_dm, addr("99"), addr("aa"))
        assert not txn_is_eai(chain_dm, addr("99"), addr("cc"))

    def test_unknown_address(self, chain_dm) -> None:
        with pytest.raises(UnknownAddress):
            chain_dm.distance(addr("1234"))
        assert chain_dm.distance_or_beyond(addr("1234")) == chain_dm.beyond

    def test_histogram_and_coverage(self, chain_dm) -> None:
        assert chain_dm.histogram() == [1, 1, 1, 1, 1, 1, 2]
        assert chain_dm.coverage() == pytest.approx(6 / 8)
        assert sorted(chain_dm.eai_addresses()) == [addr("aa"), addr("ee")]


class TestSources:
    def test_empty_exchange_list(self, chain_records) -> None:
        g = build_graph(chain_records)
        with pytest.raises(NoSources):
            compute_distances(g, [])

    def test_all_exchanges_excluded(self, chain_records) -> None:
        g = build_graph(chain_records)
        with pytest.raises(NoSources):
            compute_distances(g, [addr("ee")], [addr("ee")])

    def test_exchange_missing_from_graph_is_skipped(self, chain_records) -> None:
        g = build_graph(chain_records)
        dm = compute_distances(g, [addr("ee"), addr("4242")])
        assert dm.source_count == 1

    def test_max_hops_bounds(self, chain_records) -> None:
        g = build_graph(chain_records)
        with pytest.raises(ValueError):
            compute_distances(g, [addr("ee")], max_hops=0)

    def test_smaller_cap_moves_nodes_to_beyond(self, chain_records) -> None:
        g = build_graph(chain_records)
        dm = compute_distances(g, [addr("ee")], max_hops=2)
        assert dm.distance(addr("bb")) == 2
        assert dm.label(dm.distance(addr("cc"))) == "2+"


def test_distance_csv_round_trip(chain_dm) -> None:
    buffer = io.StringIO()
    write_distances_csv(chain_dm, buffer)
    text = buffer.getvalue()
    assert text.splitlines()[0] == "address,distance"
    assert f"{addr('ff')},5" in text
    assert f"{addr('99')},5+" in text
    restored = read_distances_csv(io.StringIO(text), chain_dm.graph)
    assert np.array_equal(restored.distances, chain_dm.distances)


def _oracle(node_count: int, edges: list[tuple[int, int]], sources: set[int], cap: int) -> list[int]:
    adjacency: dict[int, list[int]] = {}
    for u, v in edges:
        if u != v:
            adjacency.setdefault(u, []).append(v)
    best = [cap + 1] * node_count
    for source in sources:
        seen = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            if seen[node] == cap:
                continue
            for target in adjacency.get(node, []):
                if target not in seen:
                    seen[target] = seen[node] + 1
                    queue.append(target)
        for node, distance in seen.items():
            best[node] = min(best[node], distance)
    return best


@st.composite
def _random_graphs(draw: st.DrawFn):
    node_count = draw(st.integers(min_value=1, max_value=500))
    node = st.integers(min_value=0, max_value=node_count - 1)
    edges = draw(st.lists(st.tuples(node, node), max_size=3000))
    sources = draw(st.sets(node, min_size=1, max_size=5))
    return node_count, edges, sources


class TestBfsOracle:
    @PROPERTY_SETTINGS
    @given(case=_random_graphs(), threads=st.sampled_from([1, 4]))
    def test_matches_per_source_bfs(self, case, threads: int) -> None:
        node_count, edges, sources = case
        table = np.zeros((node_count, 20), dtype=np.uint8)
        table[:, 16:] = np.arange(node_count, dtype=">u4").view(np.uint8).reshape(-1, 4)
        src = np.array([u for u, _ in edges], dtype=np.int64)
        dst = np.array([v for _, v in edges], dtype=np.int64)
        amounts = np.full(len(edges), 10_000_000, dtype=np.uint64)
        g = build_graph_from_arrays(table, src, dst, amounts)
        exchanges = [Address(table[node].tobytes()) for node in sources]
        dm = compute_distances(g, exchanges, max_hops=5, threads=threads)
        assert dm.distances.tolist() == _oracle(node_count, edges, sources, 5)
