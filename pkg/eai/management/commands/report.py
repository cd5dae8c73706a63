from __future__ import annotations

from typing import Any

from eai.management.base import EaiCommand
from eai.services.analytics import (
    CellKind,
    exploiter_report,
    parse_buckets,
    txn_distance_table,
    wallet_distance_table,
)
from eai.services.ingest import AddressRole
from eai.services.pipeline import ProximityPipeline, RunConfig
from eai.services.reports import render

_INPUTS = ("transfers", "graph", "exchanges", "exclusions", "exploiters", "eoa")


class Command(EaiCommand):
    help = "Emit the wallet, transfer and exploiter distance reports."
    actions = {
        "wallets": "Wallets by max lifetime balance bucket and EAI distance.",
        "txns": "Transfers by amount bucket and transaction EAI distance.",
        "exploiters": "Distance histogram of known exploiter addresses against a baseline.",
    }

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--transfers", type=str, default=None, help="Transfer CSV or JSONL file.")
        parser.add_argument("--graph", type=str, default=None, help="Optional graph cache; built from transfers otherwise.")
        parser.add_argument("--exchanges", type=str, default=None, help="Exchange address list.")
        parser.add_argument("--exclusions", type=str, default=None, help="Exchange addresses to drop from sources.")
        parser.add_argument("--exploiters", type=str, default=None, help="Exploiter address list (exploiters).")
        parser.add_argument("--eoa", type=str, default=None, help="Optional EOA allow-list (wallets).")
        parser.add_argument("--max-hops", type=int, default=None, help="BFS hop cap (default 5).")
        parser.add_argument("--threshold-usd", type=str, default=None, help="Edge threshold when building.")
        parser.add_argument("--wallet-threshold-usd", type=str, default=None, help="Baseline wallet threshold.")
        parser.add_argument("--buckets", type=str, default="", help="Comma-separated USD bucket boundaries.")
        parser.add_argument("--cell-kind", type=str, default="count", help="txns cells: count or volume.")
        parser.add_argument("--token", type=str, default="", help="Restrict balances and transfers to one token.")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        pipeline = ProximityPipeline(config)
        # exploiters need only distances
        result = pipeline.run(need_records=action != "exploiters" or config.transfers is not None)
        token = str(options.get("token") or "").strip().upper() or None
        boundaries = str(options.get("buckets") or "").strip()

        if action == "wallets":
            buckets = parse_buckets(boundaries) if boundaries else config.buckets("wallets")
            eoa = pipeline.address_list("eoa", AddressRole.EOA)
            report = wallet_distance_table(result.distances, pipeline.balances(result, token), buckets, eoa=eoa)
        elif action == "txns":
            buckets = parse_buckets(boundaries) if boundaries else config.buckets("txns")
            kind = CellKind(str(options.get("cell_kind") or "count").strip().lower())
            report = txn_distance_table(result.distances, result.records, buckets, kind, token=token)
        else:
            exploiters = pipeline.address_list("exploiters", AddressRole.EXPLOITER)
            if exploiters is None:
                raise ValueError("--exploiters is required")
            report = exploiter_report(
                result.distances,
                exploiters,
                balances=pipeline.balances(result, token) if result.ingest is not None else None,
                threshold_usd=config.wallet_threshold_usd,
            )

        inputs = {name: getattr(config, name) for name in _INPUTS if getattr(config, name) is not None}
        content = render(
            report,
            config.output_format,
            **({"inputs": inputs, "config": config.as_dict()} if config.output_format == "json" else {}),
        )
        self.emit(content, options)
