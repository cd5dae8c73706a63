from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from eai.management.base import EaiCommand
from eai.services.gas_model import (
    BLOCK_LIMIT_NOTE,
    CALIBRATION_SAMPLES,
    DEFAULT_SIZES,
    CostParams,
    apply_fit,
    comparison_table,
    estimate,
    fit_merkle_params,
    parse_samples,
    update_cost_rows,
)
from eai.services.pipeline import RunConfig
from eai.services.reports import render


class Command(EaiCommand):
    help = "Gas and USD cost of EAI checks, transfers and registry updates per registry strategy."
    actions = {
        "estimate": "Cost of one operation for one method.",
        "table": "Comparison of check and transfer costs across methods and registry sizes.",
        "fit": "Refit the Merkle check constants from n,gas samples.",
    }

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--params", dest="gas_params_path", type=str, default=None, help="CostParams JSON file.")
        parser.add_argument("--method", type=str, default="", help="onchain, offchain or merkle.")
        parser.add_argument("--op", type=str, default="is_eai", help="is_eai, transfer or add_addresses.")
        parser.add_argument("--n", type=int, default=None, help="Registry size (merkle).")
        parser.add_argument("--k", type=int, default=1, help="Addresses added (add_addresses).")
        parser.add_argument("--sizes", type=str, default="", help="Comma-separated registry sizes (table).")
        parser.add_argument("--samples", type=str, default="", help="CSV with n,gas columns (fit).")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        params = CostParams.load(config.gas_params_path) if config.gas_params_path else CostParams()
        if action == "estimate":
            method = str(options.get("method") or "").strip().lower()
            if not method:
                raise ValueError("--method is required")
            cost = estimate(method, str(options.get("op") or "is_eai"), options.get("n"), params, k=int(options.get("k") or 1))
            payload = {"gas": cost.gas, "usd": str(cost.usd), "usd_display": cost.usd_display}
            self.emit(json.dumps(payload, indent=2) + "\n", options)
        elif action == "table":
            self._table(config, params, options)
        else:
            self._fit(params, options)

    def _table(self, config: RunConfig, params: CostParams, options: dict[str, Any]) -> None:
        sizes_text = str(options.get("sizes") or "").strip()
        sizes = tuple(int(item) for item in sizes_text.split(",") if item.strip()) if sizes_text else DEFAULT_SIZES
        rows = comparison_table(params, sizes)
        content = render(rows, config.output_format)
        if config.output_format == "text":
            content += "\n" + render(update_cost_rows(params), "text") + f"\nnote: {BLOCK_LIMIT_NOTE}\n"
        self.emit(content, options)

    def _fit(self, params: CostParams, options: dict[str, Any]) -> None:
        samples_path = str(options.get("samples") or "").strip()
        if samples_path:
            with Path(samples_path).open("r", encoding="utf-8") as handle:
                samples = parse_samples(handle)
        else:
            samples = list(CALIBRATION_SAMPLES)
        fit = fit_merkle_params(samples)
        fitted = apply_fit(params, fit)
        out = str(options.get("out") or "").strip()
        if out:
            fitted.save(Path(out))
        self.stdout.write(
            self.style.SUCCESS(
                f"merkle_base_gas={fit.base:.1f} merkle_per_hash_gas={fit.per_hash:.1f} rms_residual={fit.residual:.1f}"
            )
        )
