from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from django.core.management.base import BaseCommand, CommandError

from eai.services.pipeline import RunConfig
from eai.services.reports import write_report

logger = logging.getLogger(__name__)

VALIDATION_EXIT = 1
IO_EXIT = 2
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class EaiCommand(BaseCommand):
    """Base for the toolkit's command groups: shared flags, config layering and exit codes."""

    requires_system_checks: list[str] = []
    requires_migrations_checks = False
    actions: dict[str, str] = {}

    def add_arguments(self, parser) -> None:
        if self.actions:
            parser.add_argument(
                "action",
                nargs="?",
                default="",
                help="One of: " + ", ".join(self.actions),
            )
        parser.add_argument("--config", type=str, default="", help="JSON config file; flags override it.")
        parser.add_argument("--threads", type=int, default=None, help="Worker threads (0 = available cores).")
        parser.add_argument("--log-level", type=str, default="", help="Level for the eai logger.")
        parser.add_argument("--out", type=str, default="", help="Write output to this path instead of stdout.")
        parser.add_argument(
            "--format",
            dest="output_format",
            type=str,
            default=None,
            help="Output format: csv, json or text.",
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser) -> None:
        pass

    def handle(self, *args, **options) -> None:
        _ = args
        self._apply_log_level(str(options.get("log_level") or ""))
        action = str(options.get("action") or "").strip().lower()
        if self.actions and action not in self.actions:
            self._usage_error(action)
        try:
            config = self.build_config(options)
            self.run(action, config, options)
        except CommandError:
            raise
        except (ValueError, LookupError, ArithmeticError) as exc:
            logger.warning("command_failed command=%s action=%s error=%s", self._name, action, exc)
            raise CommandError(str(exc), returncode=VALIDATION_EXIT) from exc
        except OSError as exc:
            logger.error("command_io_failed command=%s action=%s error=%s", self._name, action, exc)
            raise CommandError(str(exc), returncode=IO_EXIT) from exc

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        raise NotImplementedError

    def build_config(self, options: dict[str, Any]) -> RunConfig:
        config_path = str(options.get("config") or "").strip()
        config = RunConfig.from_settings().with_config_file(Path(config_path) if config_path else None)
        known = set(RunConfig.__dataclass_fields__)
        flags = {key: value for key, value in options.items() if key in known and not _unset(value)}
        return config.with_overrides(**flags)

    def emit(self, content: str, options: dict[str, Any]) -> None:
        out = str(options.get("out") or "").strip()
        if out:
            path = write_report(content, Path(out))
            self.stderr.write(self.style.SUCCESS(f"Wrote {path}"))
        else:
            self.stdout.write(content, ending="")

    def _usage_error(self, action: str) -> None:
        parser = self.create_parser("manage.py", self._name)
        self.stderr.write(parser.format_usage())
        label = f"unknown action {action!r}" if action else "missing action"
        raise CommandError(f"{label}; expected one of {', '.join(self.actions)}", returncode=VALIDATION_EXIT)

    def _apply_log_level(self, level: str) -> None:
        if not level:
            return
        level = level.upper()
        if level not in LOG_LEVELS:
            raise CommandError(f"--log-level must be one of {', '.join(LOG_LEVELS)}", returncode=VALIDATION_EXIT)
        logging.getLogger("eai").setLevel(level)

    @property
    def _name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]


def _unset(value: object) -> bool:
    return value is None or value is False or (isinstance(value, str) and not value.strip())


def required_path(options: dict[str, Any], name: str) -> Path:
    value = str(options.get(name) or "").strip()
    if not value:
        raise ValueError(f"--{name.replace('_', '-')} is required")
    return Path(value)
