from __future__ import annotations

from pathlib import Path
from typing import Any

from eai.config import settings
from eai.management.base import EaiCommand
from eai.services.graph import graph_stats, load_graph, save_graph
from eai.services.pipeline import ProximityPipeline, RunConfig
from eai.services.reports import render


class Command(EaiCommand):
    help = "Build the aggregated transfer graph cache, or print statistics for one."
    actions = {
        "build": "Ingest transfers and write an EAIG1 graph cache.",
        "stats": "Print node, edge and volume totals of a cached graph.",
    }

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--transfers", type=str, default=None, help="Transfer CSV or JSONL file.")
        parser.add_argument("--graph", type=str, default=None, help="Graph cache to read (stats).")
        parser.add_argument("--threshold-usd", type=str, default=None, help="Minimum aggregated USD per edge.")
        parser.add_argument("--direct-only", action="store_true", help="Keep only wallet-to-wallet transfers.")
        parser.add_argument("--tokens", type=str, default=None, help="Comma-separated token filter.")
        parser.add_argument("--id-width", type=int, default=None, help="Node id width: 16, 32 or 64.")
        parser.add_argument("--strict", action="store_true", help="Abort on the first malformed row.")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        if action == "build":
            self._build(config, options)
        else:
            self._stats(config)

    def _build(self, config: RunConfig, options: dict[str, Any]) -> None:
        pipeline = ProximityPipeline(config)
        ingest = pipeline.load_records()
        graph = pipeline.build(ingest)
        out = Path(str(options.get("out") or "").strip() or settings.graph_cache_path)
        save_graph(graph, out)
        stats = graph_stats(graph)
        if ingest.errors:
            self.stderr.write(
                self.style.WARNING(f"Skipped {len(ingest.errors)} malformed rows; first: {ingest.errors[0]}")
            )
        self.stdout.write(
            self.style.SUCCESS(
                f"Graph written to {out}: nodes={stats.node_count} edges={stats.edge_count} "
                f"volume_usd={stats.as_dict()['total_volume_usd']}"
            )
        )

    def _stats(self, config: RunConfig) -> None:
        if config.graph is None:
            raise ValueError("--graph is required")
        stats = graph_stats(load_graph(config.graph))
        self.stdout.write(render(stats, config.output_format), ending="")
