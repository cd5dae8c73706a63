from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

import pytest

from conftest import FIXTURES, addr
from eai.services.graph import build_graph, save_graph
from eai.services.ingest import load_transfers
from eai.services.pipeline import ProximityPipeline, RunConfig


class TestRunConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"max_hops": 0},
            {"threshold_usd": Decimal("-1")},
            {"id_width": 24},
            {"output_format": "xml"},
            {"threads": -1},
            {"attestation_ttl_seconds": 0},
        ],
    )
    def test_rejects_invalid_values(self, overrides) -> None:
        with pytest.raises(ValueError):
            RunConfig(**overrides)

    def test_overrides_are_coerced(self) -> None:
        config = RunConfig().with_overrides(max_hops="3", threshold_usd="2.5", transfers="t.csv", tokens="usdc, usdt")
        assert config.max_hops == 3
        assert config.threshold_usd == Decimal("2.5")
        assert config.transfers == Path("t.csv")
        assert config.tokens == ("USDC", "USDT")

    def test_none_keeps_existing_value(self) -> None:
        assert RunConfig(max_hops=4).with_overrides(max_hops=None).max_hops == 4

    def test_unknown_key(self) -> None:
        with pytest.raises(ValueError, match="unknown config keys"):
            RunConfig().with_overrides(colour="blue")

    def test_config_file_then_flags(self, tmp_path) -> None:
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"max_hops": 3, "direct_only": "true", "output_format": "json"}), encoding="utf-8")
        config = RunConfig().with_config_file(path).with_overrides(max_hops=2)
        assert (config.max_hops, config.direct_only, config.output_format) == (2, True, "json")

    def test_config_file_must_be_object(self, tmp_path) -> None:
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ValueError):
            RunConfig().with_config_file(path)

    def test_buckets_by_kind(self) -> None:
        config = RunConfig()
        assert config.buckets("wallets")[1].lower_micro == 1_000_000_000
        assert config.buckets("txns")[1].lower_micro == 2_000_000_000

    def test_as_dict_drops_unset_paths(self) -> None:
        payload = RunConfig(transfers=Path("t.csv")).as_dict()
        assert "exchanges" not in payload
        assert payload["transfers"] == Path("t.csv")


class TestPipeline:
    def _config(self, **kwargs) -> RunConfig:
        return RunConfig(
            transfers=FIXTURES / "transfers.csv",
            exchanges=FIXTURES / "exchanges.txt",
            exclusions=FIXTURES / "exclusions.txt",
            **kwargs,
        )

    def test_run_from_transfers(self) -> None:
        run = ProximityPipeline(self._config()).run()
        assert run.distances.distance(addr("e1")) == 0
        assert run.distances.distance(addr("f1")) == 5
        assert run.records

    def test_cached_graph_skips_records(self, tmp_path) -> None:
        path = tmp_path / "g.eaig"
        save_graph(build_graph(load_transfers(FIXTURES / "transfers.csv").records), path)
        run = ProximityPipeline(self._config(graph=path)).run(need_records=False)
        assert run.ingest is None
        assert run.records == []
        assert run.distances.distance(addr("a1")) == 1

    def test_missing_inputs(self) -> None:
        with pytest.raises(ValueError, match="--transfers"):
            ProximityPipeline(RunConfig()).run()
        with pytest.raises(ValueError, match="--exchanges"):
            ProximityPipeline(RunConfig(transfers=FIXTURES / "transfers.csv")).run()

    def test_missing_file_is_os_error(self, tmp_path) -> None:
        with pytest.raises(OSError):
            ProximityPipeline(self._config().with_overrides(transfers=tmp_path / "nope.csv")).run()
