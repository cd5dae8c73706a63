from __future__ import annotations

from decimal import Decimal
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    data_dir: Path = Path("data")
    cache_dir: Path = data_dir / "cache"
    graph_cache_path: Path = cache_dir / "graph.eaig"
    log_dir: Path = Path("log")
    log_backup_days: int = 30
    console_log_level: str = "INFO"

    edge_threshold_usd: Decimal = Decimal("10")
    max_hops: int = 5
    wallet_threshold_usd: Decimal = Decimal("10000")
    txn_min_amount_usd: Decimal = Decimal("2000")
    wallet_buckets: str = "10,1000,100000,10000000"
    txn_buckets: str = "10,2000,100000,10000000"
    id_width: int = 32
    threads: int = 0
    tokens: str = ""
    direct_only: bool = False
    strict: bool = False
    output_format: str = "csv"

    merkle_hash: str = "keccak256"
    eai_signer_key_path: Path | None = None
    attestation_ttl_seconds: int = 86400
    gas_params_path: Path | None = None


settings = Settings()
