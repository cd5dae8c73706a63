from __future__ import annotations

from pathlib import Path

from eai.config import settings as eai_settings

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = "dev-only-secret-key-change-in-production"
DEBUG = False
ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = ["eai.apps.EaiAppConfig"]

# Command-line toolkit only; nothing is persisted through the ORM.
DATABASES: dict[str, dict[str, str]] = {}

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

LOG_DIR = eai_settings.log_dir if eai_settings.log_dir.is_absolute() else BASE_DIR / eai_settings.log_dir
LOG_DIR.mkdir(parents=True, exist_ok=True)

_HANDLERS = ["console", "application_file", "error_file"]


def _rotating_file(filename: str, level: str) -> dict[str, object]:
    return {
        "class": "logging.handlers.TimedRotatingFileHandler",
        "formatter": "standard",
        "filename": str(LOG_DIR / filename),
        "when": "midnight",
        "backupCount": eai_settings.log_backup_days,
        "encoding": "utf-8",
        "level": level,
    }


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        }
    },
    "handlers": {
        # stdout carries command output
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "standard",
            "level": eai_settings.console_log_level,
        },
        "application_file": _rotating_file("application.log", "DEBUG"),
        "error_file": _rotating_file("error.log", "WARNING"),
    },
    "loggers": {
        "django": {"handlers": _HANDLERS, "level": "WARNING", "propagate": False},
        "eai": {"handlers": _HANDLERS, "level": "DEBUG", "propagate": False},
    },
    "root": {"handlers": _HANDLERS, "level": "INFO"},
}
