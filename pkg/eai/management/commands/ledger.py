from __future__ import annotations

import json
from typing import Any

from eai.management.base import EaiCommand, required_path
from eai.services.ingest import format_usd
from eai.services.ledger_sim import parse_script, replay
from eai.services.pipeline import RunConfig


class Command(EaiCommand):
    help = "Replay a mint/transfer/set_exchange script against the packed-flag token ledger."
    actions = {"simulate": "Replay a script and dump per-address balance and flags as JSON."}

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--script", type=str, default="", help="CSV script: op,from,to,amount[,suppress_flag].")
        parser.add_argument(
            "--skip-rejected",
            action="store_true",
            help="Log and skip transfers that fail instead of aborting.",
        )

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        path = required_path(options, "script")
        with path.open("r", encoding="utf-8") as handle:
            ops = parse_script(handle, source=str(path))
        ledger = replay(ops, strict=not options.get("skip_rejected"))
        payload = {
            "accounts": ledger.dump(),
            "events": len(ledger.events),
            "eai_count": len(ledger.eai_set()),
            "total_supply": format_usd(ledger.total_supply()),
        }
        self.emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", options)
