from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from decimal import Decimal
from pathlib import Path
from typing import Any

from eai.config import settings
from eai.services.analytics import BalanceSummary, Bucket, max_lifetime_balances, parse_buckets
from eai.services.graph import EdgeThreshold, TransactionGraph, build_graph, load_graph
from eai.services.ingest import AddressList, AddressRole, IngestResult, load_address_list, load_transfers
from eai.services.proximity import DistanceMap, compute_distances

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("csv", "json", "text")
ID_WIDTHS = (16, 32, 64)
_PATH_FIELDS = {"transfers", "exchanges", "exclusions", "exploiters", "eoa", "graph", "signer_key_path", "gas_params_path"}
_DECIMAL_FIELDS = {"threshold_usd", "wallet_threshold_usd", "txn_min_amount_usd"}
_INT_FIELDS = {"max_hops", "id_width", "threads", "attestation_ttl_seconds"}
_BOOL_FIELDS = {"strict", "direct_only"}


@dataclass(frozen=True)
class RunConfig:
    transfers: Path | None = None
    exchanges: Path | None = None
    exclusions: Path | None = None
    exploiters: Path | None = None
    eoa: Path | None = None
    graph: Path | None = None
    threshold_usd: Decimal = Decimal("10")
    max_hops: int = 5
    wallet_threshold_usd: Decimal = Decimal("10000")
    txn_min_amount_usd: Decimal = Decimal("2000")
    wallet_buckets: str = "10,1000,100000,10000000"
    txn_buckets: str = "10,2000,100000,10000000"
    tokens: tuple[str, ...] = ()
    direct_only: bool = False
    strict: bool = False
    output_format: str = "csv"
    id_width: int = 32
    threads: int = 0
    merkle_hash: str = "keccak256"
    signer_key_path: Path | None = None
    attestation_ttl_seconds: int = 86400
    gas_params_path: Path | None = None

    def __post_init__(self) -> None:
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        if self.threshold_usd < 0:
            raise ValueError("threshold_usd must be >= 0")
        if self.id_width not in ID_WIDTHS:
            raise ValueError(f"id_width must be one of {', '.join(map(str, ID_WIDTHS))}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"format must be one of {', '.join(OUTPUT_FORMATS)}")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")
        if self.attestation_ttl_seconds <= 0:
            raise ValueError("attestation_ttl_seconds must be > 0")

    @classmethod
    def from_settings(cls) -> RunConfig:
        return cls(
            threshold_usd=settings.edge_threshold_usd,
            max_hops=settings.max_hops,
            wallet_threshold_usd=settings.wallet_threshold_usd,
            txn_min_amount_usd=settings.txn_min_amount_usd,
            wallet_buckets=settings.wallet_buckets,
            txn_buckets=settings.txn_buckets,
            tokens=_split_csv(settings.tokens),
            direct_only=settings.direct_only,
            strict=settings.strict,
            output_format=settings.output_format,
            id_width=settings.id_width,
            threads=settings.threads,
            merkle_hash=settings.merkle_hash,
            signer_key_path=settings.eai_signer_key_path,
            attestation_ttl_seconds=settings.attestation_ttl_seconds,
            gas_params_path=settings.gas_params_path,
        )

    def with_overrides(self, **kwargs: object) -> RunConfig:
        known = {item.name for item in fields(self)}
        unknown = sorted(set(kwargs) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        updates = {name: _coerce(name, value) for name, value in kwargs.items() if value is not None}
        return replace(self, **updates)

    def with_config_file(self, path: Path | None) -> RunConfig:
        if path is None:
            return self
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(payload, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return self.with_overrides(**payload)

    def edge_threshold(self) -> EdgeThreshold:
        return EdgeThreshold.usd(self.threshold_usd)

    def buckets(self, kind: str) -> list[Bucket]:
        return parse_buckets(self.wallet_buckets if kind == "wallets" else self.txn_buckets)

    def as_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        return {key: value for key, value in payload.items() if value is not None}


@dataclass
class ProximityRun:
    ingest: IngestResult | None
    graph: TransactionGraph
    distances: DistanceMap

    @property
    def records(self) -> list:
        return self.ingest.records if self.ingest is not None else []


class ProximityPipeline:
    """Loads transfers and address lists, then builds or loads the graph and runs the BFS."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config

    def load_records(self) -> IngestResult:
        path = self._require("transfers")
        return load_transfers(path, strict=self.config.strict)

    def build(self, ingest: IngestResult | None = None) -> TransactionGraph:
        ingest = ingest or self.load_records()
        return build_graph(
            ingest.records,
            self.config.edge_threshold(),
            self.config.direct_only,
            tokens=set(self.config.tokens) or None,
            id_width=self.config.id_width,
        )

    def address_list(self, name: str, role: AddressRole) -> AddressList | None:
        path = getattr(self.config, name)
        return load_address_list(path, role) if path is not None else None

    def run(self, *, need_records: bool = True) -> ProximityRun:
        cached = self.config.graph is not None
        ingest = self.load_records() if need_records or not cached else None
        graph = load_graph(self.config.graph) if cached else self.build(ingest)
        exchanges = self.address_list("exchanges", AddressRole.EXCHANGE)
        if exchanges is None:
            raise ValueError("--exchanges is required")
        exclusions = self.address_list("exclusions", AddressRole.EXCLUSION)
        dm = compute_distances(graph, exchanges, exclusions, self.config.max_hops, threads=self.config.threads)
        return ProximityRun(ingest=ingest, graph=graph, distances=dm)

    def balances(self, run: ProximityRun, token: str | None = None) -> BalanceSummary:
        return max_lifetime_balances(run.records, token=token)

    def _require(self, name: str) -> Path:
        value = getattr(self.config, name)
        if value is None:
            raise ValueError(f"--{name.replace('_', '-')} is required")
        return Path(value)


def _coerce(name: str, value: object) -> object:
    if name in _PATH_FIELDS:
        return Path(str(value))
    if name in _DECIMAL_FIELDS:
        return Decimal(str(value))
    if name in _INT_FIELDS:
        return int(value)
    if name in _BOOL_FIELDS:
        if isinstance(value, str):
            return value.strip().lower() in {"1", "true", "yes"}
        return bool(value)
    if name == "tokens":
        if isinstance(value, str):
            return _split_csv(value)
        return tuple(str(item).strip().upper() for item in value if str(item).strip())
    return str(value)


def _split_csv(value: str) -> tuple[str, ...]:
    return tuple(item.strip().upper() for item in str(value or "").split(",") if item.strip())
