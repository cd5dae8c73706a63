from __future__ import annotations

import csv
import io
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from eai.services.analytics import DistanceTable, ExploiterReport, SummaryStats
from eai.services.graph import GraphStats
from eai.services.ingest import file_digest

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "text")


def table_rows(report: Any) -> tuple[list[str], list[list[str]]]:
    """Header and string rows for any report object the CLI emits."""
    if isinstance(report, DistanceTable):
        return ["bucket", *report.columns], report.rows()
    if isinstance(report, ExploiterReport):
        columns = [str(hop) for hop in range(report.max_hops + 1)] + [f"{report.max_hops}+"]
        return (
            ["series", *columns],
            [
                ["exploiters", *(str(value) for value in report.histogram)],
                ["baseline", *(str(value) for value in report.baseline)],
            ],
        )
    if isinstance(report, (SummaryStats, GraphStats)):
        items = report.as_dict()
        return ["metric", "value"], [[key, "" if value is None else str(value)] for key, value in items.items()]
    if isinstance(report, Sequence) and report and isinstance(report[0], Mapping):
        header = list(report[0].keys())
        return header, [[_cell(row.get(column)) for column in header] for row in report]
    raise TypeError(f"cannot render {type(report).__name__}")


def render_csv(report: Any) -> str:
    header, rows = table_rows(report)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def render_text(report: Any) -> str:
    header, rows = table_rows(report)
    widths = [max(len(row[index]) for row in [header, *rows]) for index in range(len(header))]
    lines = []
    for row in [header, *rows]:
        cells = [row[0].ljust(widths[0])] + [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    if isinstance(report, ExploiterReport):
        lines.append("")
        lines.append(f"pct_non_eai={report.pct_non_eai} pct_beyond={report.pct_beyond} not_found={report.not_found}")
    return "\n".join(lines) + "\n"


def render_json(
    report: Any,
    *,
    inputs: Mapping[str, Path] | None = None,
    config: Mapping[str, Any] | None = None,
    generated_at: str | None = None,
) -> str:
    if hasattr(report, "as_dict"):
        body: Any = report.as_dict()
    else:
        body = [dict(row) for row in report]
    payload = {
        "generated_at": generated_at or _utc_iso_now(),
        "input_digests": {name: file_digest(path) for name, path in sorted((inputs or {}).items())},
        "config": {key: _cell(value) for key, value in (config or {}).items()},
        "report": body,
    }
    return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"


def render(report: Any, output_format: str = "csv", **json_options: Any) -> str:
    if output_format == "csv":
        return render_csv(report)
    if output_format == "text":
        return render_text(report)
    if output_format == "json":
        return render_json(report, **json_options)
    raise ValueError(f"unsupported output format {output_format!r}; expected one of {', '.join(FORMATS)}")


def write_report(content: str, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    temp_path.write_text(content, encoding="utf-8")
    temp_path.replace(path)
    logger.info("report_written path=%s bytes=%s", path, len(content.encode("utf-8")))
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple, set, frozenset)):
        return ",".join(str(item) for item in value)
    return str(value)


def _utc_iso_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()
