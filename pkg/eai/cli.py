from __future__ import annotations

import os
from typing import Sequence


def run(argv: Sequence[str]) -> int:
    """Run one toolkit command (``["graph", "build", ...]``) and return its exit code."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    from django.core.management import execute_from_command_line

    try:
        execute_from_command_line(["manage.py", *argv])
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    return 0
