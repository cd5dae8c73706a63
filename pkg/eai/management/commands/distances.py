from __future__ import annotations

import io
from typing import Any

from eai.management.base import EaiCommand
from eai.services.pipeline import ProximityPipeline, RunConfig
from eai.services.proximity import write_distances_csv


class Command(EaiCommand):
    help = "Compute capped EAI distances for every graph node and write address,distance CSV."

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--graph", type=str, default=None, help="Graph cache built by `graph build`.")
        parser.add_argument("--transfers", type=str, default=None, help="Build the graph from transfers instead.")
        parser.add_argument("--exchanges", type=str, default=None, help="Exchange address list.")
        parser.add_argument("--exclusions", type=str, default=None, help="Exchange addresses to drop from sources.")
        parser.add_argument("--max-hops", type=int, default=None, help="BFS hop cap (default 5).")
        parser.add_argument("--threshold-usd", type=str, default=None, help="Edge threshold when building.")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        result = ProximityPipeline(config).run(need_records=False)
        buffer = io.StringIO()
        write_distances_csv(result.distances, buffer)
        self.emit(buffer.getvalue(), options)
        histogram = result.distances.histogram()
        labels = result.distances.labels()
        summary = " ".join(f"{label}={count}" for label, count in zip(labels, histogram))
        self.stderr.write(self.style.SUCCESS(f"Distances for {result.graph.node_count} nodes: {summary}"))
