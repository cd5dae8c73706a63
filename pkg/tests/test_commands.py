from __future__ import annotations

import io
import json

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from conftest import FIXTURES, addr
from eai.cli import run as cli_run
from eai.services.graph import load_graph
from eai.services.ingest import format_usd

NOW = 1_700_000_000


def call(*args, **options) -> tuple[str, str]:
    stdout, stderr = io.StringIO(), io.StringIO()
    call_command(*args, stdout=stdout, stderr=stderr, **options)
    return stdout.getvalue(), stderr.getvalue()


@pytest.fixture
def chain_files(tmp_path, chain_records):
    transfers = tmp_path / "chain.csv"
    lines = ["ordering_key,from,to,amount_usd,token,direct"]
    lines += [f"{r.ordering_key},{r.sender},{r.receiver},{format_usd(r.amount_micro)},USDC,true" for r in chain_records]
    transfers.write_text("\n".join(lines) + "\n", encoding="utf-8")
    exchanges = tmp_path / "exchanges.txt"
    exchanges.write_text(f"{addr('ee')}\n", encoding="utf-8")
    return transfers, exchanges


def fixture_inputs() -> dict[str, str]:
    return {
        "transfers": str(FIXTURES / "transfers.csv"),
        "exchanges": str(FIXTURES / "exchanges.txt"),
        "exclusions": str(FIXTURES / "exclusions.txt"),
    }


class TestExitCodes:
    def test_unknown_command(self) -> None:
        assert cli_run(["nosuchcommand"]) == 1

    def test_unknown_action(self) -> None:
        with pytest.raises(CommandError) as excinfo:
            call("merkle", "frobnicate")
        assert excinfo.value.returncode == 1
        assert cli_run(["merkle", "frobnicate"]) == 1

    def test_missing_action(self) -> None:
        with pytest.raises(CommandError) as excinfo:
            call("gas")
        assert excinfo.value.returncode == 1

    def test_missing_input_file(self, tmp_path) -> None:
        with pytest.raises(CommandError) as excinfo:
            call("graph", "build", transfers=str(tmp_path / "missing.csv"), out=str(tmp_path / "g.eaig"))
        assert excinfo.value.returncode == 2
        assert cli_run(["graph", "build", "--transfers", str(tmp_path / "missing.csv")]) == 2

    def test_validation_error(self, chain_files) -> None:
        transfers, exchanges = chain_files
        with pytest.raises(CommandError) as excinfo:
            call("distances", transfers=str(transfers), exchanges=str(exchanges), max_hops=0)
        assert excinfo.value.returncode == 1

    def test_bad_log_level(self) -> None:
        with pytest.raises(CommandError):
            call("gas", "table", log_level="LOUD")


class TestGraphAndDistances:
    def test_build_then_stats(self, tmp_path, chain_files) -> None:
        transfers, _ = chain_files
        path = tmp_path / "g.eaig"
        stdout, _ = call("graph", "build", transfers=str(transfers), out=str(path))
        assert "nodes=8 edges=6" in stdout
        stdout, _ = call("graph", "stats", graph=str(path), output_format="csv")
        assert "node_count,8" in stdout

    def test_distances_on_chain(self, chain_files) -> None:
        transfers, exchanges = chain_files
        stdout, stderr = call("distances", transfers=str(transfers), exchanges=str(exchanges))
        assert stdout.splitlines()[0] == "address,distance"
        assert f"{addr('ff')},5" in stdout.splitlines()
        assert f"{addr('99')},5+" in stdout.splitlines()
        assert "5+=2" in stderr

    def test_distances_from_cached_graph(self, tmp_path, chain_files) -> None:
        transfers, exchanges = chain_files
        path = tmp_path / "g.eaig"
        call("graph", "build", transfers=str(transfers), out=str(path))
        stdout, _ = call("distances", graph=str(path), exchanges=str(exchanges))
        assert f"{addr('aa')},1" in stdout.splitlines()


class TestReports:
    def test_txns_report_matches_expected(self) -> None:
        stdout, _ = call("report", "txns", token="USDC", **fixture_inputs())
        assert stdout == (FIXTURES / "txn_count.csv").read_text(encoding="utf-8")

    def test_wallets_report_written_to_file(self, tmp_path) -> None:
        out = tmp_path / "wallets.csv"
        call("report", "wallets", token="USDC", out=str(out), **fixture_inputs())
        assert out.read_text(encoding="utf-8") == (FIXTURES / "wallet_table.csv").read_text(encoding="utf-8")

    def test_exploiters_require_list(self) -> None:
        with pytest.raises(CommandError):
            call("report", "exploiters", **fixture_inputs())

    def test_json_is_stable_apart_from_timestamp(self) -> None:
        options = {"exploiters": str(FIXTURES / "exploiters.txt"), "output_format": "json", **fixture_inputs()}
        first = json.loads(call("report", "exploiters", **options)[0])
        second = json.loads(call("report", "exploiters", **options)[0])
        first.pop("generated_at")
        second.pop("generated_at")
        assert first == second
        assert set(first["input_digests"]) == {"transfers", "exchanges", "exclusions", "exploiters"}
        assert first["report"]["not_found"] == 1

    def test_exploiters_from_cached_graph(self, tmp_path) -> None:
        inputs = fixture_inputs()
        path = tmp_path / "g.eaig"
        call("graph", "build", transfers=inputs["transfers"], out=str(path))
        options = {"exploiters": str(FIXTURES / "exploiters.txt"), "output_format": "json"}
        cached = json.loads(
            call(
                "report",
                "exploiters",
                graph=str(path),
                exchanges=inputs["exchanges"],
                exclusions=inputs["exclusions"],
                **options,
            )[0]
        )
        built = json.loads(call("report", "exploiters", **options, **inputs)[0])
        assert cached["report"]["histogram"] == built["report"]["histogram"]
        assert cached["report"]["not_found"] == 1
        assert sum(cached["report"]["baseline"].values()) == load_graph(path).node_count

    def test_summary_stats(self) -> None:
        stdout, _ = call("stats", token="USDC", **fixture_inputs())
        assert "population,14" in stdout.splitlines()
        assert "txn_population,26" in stdout.splitlines()


class TestMerkleCommand:
    def test_build_prove_verify(self, tmp_path) -> None:
        addresses = tmp_path / "eai.txt"
        addresses.write_text("".join(f"{addr(s)}\n" for s in ["a1", "a2", "a3", "e1", "e2"]), encoding="utf-8")
        registry = tmp_path / "registry.txt"
        stdout, _ = call("merkle", "build", addresses=str(addresses), out=str(registry))
        assert "leaves=5 depth=3" in stdout

        proof = tmp_path / "proof.json"
        call("merkle", "prove", registry=str(registry), address=str(addr("a2")), out=str(proof))
        stdout, _ = call("merkle", "verify", proof=str(proof), registry=str(registry))
        assert "valid hash_operations=" in stdout

        payload = json.loads(proof.read_text(encoding="utf-8"))
        payload["address"] = str(addr("b9"))
        proof.write_text(json.dumps(payload), encoding="utf-8")
        out = io.StringIO()
        with pytest.raises(CommandError) as excinfo:
            call_command("merkle", "verify", proof=str(proof), registry=str(registry), stdout=out)
        assert excinfo.value.returncode == 1
        assert out.getvalue().strip() == "invalid"

    def test_build_from_distances(self, tmp_path) -> None:
        registry = tmp_path / "registry.txt"
        call("merkle", "build", out=str(registry), **fixture_inputs())
        members = registry.read_text(encoding="utf-8").split()
        assert str(addr("e1")) in members
        assert str(addr("a1")) in members
        assert str(addr("b1")) not in members

    def test_prove_non_member(self, tmp_path) -> None:
        addresses = tmp_path / "eai.txt"
        addresses.write_text(f"{addr('a1')}\n", encoding="utf-8")
        registry = tmp_path / "registry.txt"
        call("merkle", "build", addresses=str(addresses), out=str(registry))
        with pytest.raises(CommandError) as excinfo:
            call("merkle", "prove", registry=str(registry), address=str(addr("b1")))
        assert excinfo.value.returncode == 1


class TestAttestCommand:
    def test_keygen_sign_verify(self, tmp_path) -> None:
        key = tmp_path / "signer.key"
        call("attest", "keygen", out=str(key))
        attestation = tmp_path / "att.json"
        call(
            "attest",
            "sign",
            signer_key_path=str(key),
            address=str(addr("a1")),
            status="eai",
            attestation_ttl_seconds=60,
            nonce=5,
            now=str(NOW),
            out=str(attestation),
        )
        assert json.loads(attestation.read_text(encoding="utf-8"))["expires_at"] == NOW + 60

        stdout, _ = call("attest", "verify", signer_key_path=str(key), attestation=str(attestation), now=str(NOW + 10))
        assert "valid is_eai=true" in stdout

        out = io.StringIO()
        with pytest.raises(CommandError) as excinfo:
            call_command(
                "attest",
                "verify",
                signer_key_path=str(key),
                attestation=str(attestation),
                now="2023-11-14T22:14:20Z",
                stdout=out,
            )
        assert excinfo.value.returncode == 1
        assert out.getvalue().strip() == "expired"

    def test_sign_from_registry_membership(self, tmp_path) -> None:
        key = tmp_path / "signer.key"
        call("attest", "keygen", out=str(key))
        addresses = tmp_path / "eai.txt"
        addresses.write_text(f"{addr('a1')}\n", encoding="utf-8")
        registry = tmp_path / "registry.txt"
        call("merkle", "build", addresses=str(addresses), out=str(registry))
        stdout, _ = call("attest", "sign", signer_key_path=str(key), address=str(addr("b1")), registry=str(registry))
        assert json.loads(stdout)["is_eai"] is False


class TestLedgerCommand:
    def test_simulate(self, tmp_path) -> None:
        script = tmp_path / "script.csv"
        script.write_text(
            "op,from,to,amount\n"
            f"set_exchange,{addr('e1')},,\n"
            f"mint,,{addr('e1')},100\n"
            f"transfer,{addr('e1')},{addr('a1')},40\n"
            f"transfer,{addr('a1')},{addr('b1')},10\n",
            encoding="utf-8",
        )
        payload = json.loads(call("ledger", "simulate", script=str(script))[0])
        assert payload["eai_count"] == 2
        assert payload["total_supply"] == "100.000000"
        assert payload["accounts"][str(addr("a1"))] == {"balance": "30.000000", "is_eai": True, "is_exchange": False}

    def test_overdraft_aborts_unless_skipped(self, tmp_path) -> None:
        script = tmp_path / "script.csv"
        script.write_text(f"op,from,to,amount\ntransfer,{addr('a1')},{addr('b1')},10\n", encoding="utf-8")
        with pytest.raises(CommandError):
            call("ledger", "simulate", script=str(script))
        payload = json.loads(call("ledger", "simulate", script=str(script), skip_rejected=True)[0])
        assert payload["events"] == 0


class TestGasCommand:
    def test_table(self) -> None:
        stdout, _ = call("gas", "table")
        assert stdout.splitlines()[1].startswith("-,onchain,612,$0.03")

    def test_text_table_has_update_rows(self) -> None:
        stdout, _ = call("gas", "table", output_format="text")
        assert "26785" in stdout
        assert "note:" in stdout

    def test_estimate(self) -> None:
        payload = json.loads(call("gas", "estimate", method="merkle", op="is_eai", n=500)[0])
        assert payload["gas"] == 6_341

    def test_fit_writes_params(self, tmp_path) -> None:
        out = tmp_path / "gas.json"
        stdout, _ = call("gas", "fit", out=str(out))
        assert "merkle_base_gas=" in stdout
        params = json.loads(out.read_text(encoding="utf-8"))
        assert params["merkle_per_hash_gas"] == pytest.approx(295.7, abs=1)
