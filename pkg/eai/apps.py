from __future__ import annotations

from django.apps import AppConfig


class EaiAppConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "eai"
