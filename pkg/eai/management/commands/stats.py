from __future__ import annotations

from typing import Any

from eai.management.base import EaiCommand
from eai.services.analytics import summary_stats
from eai.services.pipeline import ProximityPipeline, RunConfig
from eai.services.reports import render

_INPUTS = ("transfers", "graph", "exchanges", "exclusions")


class Command(EaiCommand):
    help = "Headline EAI shares: wallets above the balance threshold and large transfers."

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--transfers", type=str, default=None, help="Transfer CSV or JSONL file.")
        parser.add_argument("--graph", type=str, default=None, help="Optional graph cache.")
        parser.add_argument("--exchanges", type=str, default=None, help="Exchange address list.")
        parser.add_argument("--exclusions", type=str, default=None, help="Exchange addresses to drop from sources.")
        parser.add_argument("--max-hops", type=int, default=None, help="BFS hop cap (default 5).")
        parser.add_argument("--threshold-usd", type=str, default=None, help="Edge threshold when building.")
        parser.add_argument("--wallet-threshold-usd", type=str, default=None, help="Wallet population threshold.")
        parser.add_argument("--txn-min-amount-usd", type=str, default=None, help="Large-transfer threshold.")
        parser.add_argument("--token", type=str, default="", help="Restrict balances and transfers to one token.")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        pipeline = ProximityPipeline(config)
        result = pipeline.run()
        token = str(options.get("token") or "").strip().upper() or None
        stats = summary_stats(
            result.distances,
            pipeline.balances(result, token),
            config.wallet_threshold_usd,
            records=result.records,
            min_amount_usd=config.txn_min_amount_usd,
            token=token,
        )
        inputs = {name: getattr(config, name) for name in _INPUTS if getattr(config, name) is not None}
        content = render(
            stats,
            config.output_format,
            **({"inputs": inputs, "config": config.as_dict()} if config.output_format == "json" else {}),
        )
        self.emit(content, options)
