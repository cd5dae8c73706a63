from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (500, 30_000, 2_250_000)
CALIBRATION_SAMPLES = ((500, 6_283), (30_000, 8_214), (2_250_000, 10_135))
BLOCK_LIMIT_NOTE = "on-chain registry adds are limited to about 2 million addresses per transaction by the block gas limit"
_GWEI = Decimal("1e-9")
_CENT = Decimal("0.01")


class UnsupportedCombination(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


class Method(str, Enum):
    ONCHAIN = "onchain"
    OFFCHAIN = "offchain"
    MERKLE = "merkle"


class Operation(str, Enum):
    IS_EAI = "is_eai"
    TRANSFER = "transfer"
    ADD_ADDRESSES = "add_addresses"


class CostParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    onchain_check_gas: int = Field(612, ge=0)
    offchain_check_gas: int = Field(6_757, ge=0)
    merkle_base_gas: float = Field(3_677, ge=0)
    merkle_per_hash_gas: float = Field(296, ge=0)
    onchain_base_transfer_gas: int = Field(54_809, ge=0)
    offchain_base_transfer_gas: int = Field(51_598, ge=0)
    merkle_base_transfer_gas: int = Field(50_602, ge=0)
    merkle_calldata_per_level_gas: int = Field(806, ge=0)
    registry_add_per_address_gas: int = Field(0, ge=0)
    registry_add_per_address_usd: Decimal = Field(Decimal("2.30"), ge=0)
    merkle_update_gas: int = Field(26_785, ge=0)
    eth_price_usd: Decimal = Field(Decimal("2400"), ge=0)
    gas_price_gwei: Decimal = Field(Decimal("20"), ge=0)
    block_gas_limit: int = Field(30_000_000, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _derive_add_gas(cls, data: object) -> object:
        if not isinstance(data, dict) or data.get("registry_add_per_address_gas") is not None:
            return data
        fields = cls.model_fields
        usd = Decimal(str(data.get("registry_add_per_address_usd", fields["registry_add_per_address_usd"].default)))
        gwei = Decimal(str(data.get("gas_price_gwei", fields["gas_price_gwei"].default)))
        eth = Decimal(str(data.get("eth_price_usd", fields["eth_price_usd"].default)))
        per_gas = gwei * _GWEI * eth
        gas = 0 if per_gas <= 0 else int((usd / per_gas).to_integral_value(ROUND_HALF_UP))
        return {**data, "registry_add_per_address_gas": gas}

    @classmethod
    def load(cls, path: Path) -> CostParams:
        path = Path(path)
        return cls.model_validate(json.loads(path.read_text(encoding="utf-8")))

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_path = path.with_suffix(path.suffix + ".tmp")
        temp_path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        temp_path.replace(path)
        return path

    def base_transfer_gas(self, method: Method) -> int:
        return {
            Method.ONCHAIN: self.onchain_base_transfer_gas,
            Method.OFFCHAIN: self.offchain_base_transfer_gas,
            Method.MERKLE: self.merkle_base_transfer_gas,
        }[method]


@dataclass(frozen=True)
class CostEstimate:
    gas: int
    usd: Decimal

    @property
    def usd_display(self) -> str:
        return f"${self.usd.quantize(_CENT, rounding=ROUND_HALF_UP)}"


@dataclass(frozen=True)
class MerkleFit:
    base: float
    per_hash: float
    residual: float


def usd_cost(gas: int, params: CostParams) -> Decimal:
    return Decimal(gas) * params.gas_price_gwei * _GWEI * params.eth_price_usd


def merkle_depth(n: int) -> int:
    if n < 1:
        raise ValueError("registry size must be >= 1")
    return (n - 1).bit_length()


def estimate(
    method: Method | str,
    op: Operation | str,
    n: int | None = None,
    params: CostParams | None = None,
    *,
    k: int = 1,
) -> CostEstimate:
    params = params or CostParams()
    try:
        method = Method(method)
        op = Operation(op)
    except ValueError as exc:
        raise UnsupportedCombination(str(exc)) from exc
    if method is Method.MERKLE and op is not Operation.ADD_ADDRESSES and (n is None or n < 1):
        raise UnsupportedCombination("merkle checks need a registry size n >= 1")

    if op is Operation.IS_EAI:
        gas = _check_gas(method, n, params)
    elif op is Operation.TRANSFER:
        gas = params.base_transfer_gas(method) + 2 * _check_gas(method, n, params)
        if method is Method.MERKLE:
            gas += params.merkle_calldata_per_level_gas * merkle_depth(n)
    else:
        if k < 0:
            raise UnsupportedCombination("cannot add a negative number of addresses")
        if method is Method.ONCHAIN:
            gas = k * params.registry_add_per_address_gas
        elif method is Method.MERKLE:
            gas = params.merkle_update_gas
        else:
            gas = 0
    return CostEstimate(gas=gas, usd=usd_cost(gas, params))


def fit_merkle_params(samples: Iterable[tuple[int, int]]) -> MerkleFit:
    """Least-squares line of check gas against tree depth."""
    points = [(merkle_depth(int(n)), float(gas)) for n, gas in samples]
    if len(points) < 2 or len({depth for depth, _ in points}) < 2:
        raise DegenerateFit("need at least two samples with distinct tree depths")
    depths = np.array([depth for depth, _ in points], dtype=np.float64)
    gas = np.array([value for _, value in points], dtype=np.float64)
    design = np.column_stack([np.ones_like(depths), depths])
    (base, per_hash), *_ = np.linalg.lstsq(design, gas, rcond=None)
    residual = float(np.sqrt(np.mean((design @ np.array([base, per_hash]) - gas) ** 2)))
    fit = MerkleFit(base=float(base), per_hash=float(per_hash), residual=residual)
    logger.info(
        "merkle_fit samples=%s base=%.3f per_hash=%.3f rms_residual=%.3f",
        len(points),
        fit.base,
        fit.per_hash,
        fit.residual,
    )
    return fit


def apply_fit(params: CostParams, fit: MerkleFit) -> CostParams:
    if fit.base < 0 or fit.per_hash < 0:
        raise DegenerateFit("fitted Merkle constants must be non-negative")
    return params.model_copy(update={"merkle_base_gas": fit.base, "merkle_per_hash_gas": fit.per_hash})


def parse_samples(stream: IO[str]) -> list[tuple[int, int]]:
    reader = csv.DictReader(io.StringIO(stream.read()))
    samples = []
    for row in reader:
        try:
            samples.append((int(row["n"]), int(row["gas"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {reader.line_num}: expected integer columns n,gas") from exc
    return samples


def comparison_table(
    params: CostParams | None = None,
    sizes: Sequence[int] = DEFAULT_SIZES,
) -> list[dict[str, object]]:
    params = params or CostParams()
    rows: list[dict[str, object]] = []
    plan = [(Method.ONCHAIN, None), (Method.OFFCHAIN, None)] + [(Method.MERKLE, n) for n in sizes]
    for method, n in plan:
        check = estimate(method, Operation.IS_EAI, n, params)
        transfer = estimate(method, Operation.TRANSFER, n, params)
        rows.append(
            {
                "registry_size": "-" if n is None else f"{n:,}",
                "method": method.value,
                "is_eai_gas": check.gas,
                "is_eai_usd": check.usd_display,
                "transfer_gas": transfer.gas,
                "transfer_usd": transfer.usd_display,
            }
        )
    return rows


def update_cost_rows(params: CostParams | None = None, k: int = 1) -> list[dict[str, object]]:
    params = params or CostParams()
    rows = []
    for method in Method:
        cost = estimate(method, Operation.ADD_ADDRESSES, None, params, k=k)
        rows.append({"method": method.value, "addresses": k, "gas": cost.gas, "usd": cost.usd_display})
    return rows


def hybrid_check_gas(onchain_share: float, n: int, params: CostParams | None = None) -> float:
    """Expected per-check gas when a share of lookups hits the on-chain tier and the rest use proofs."""
    if not 0.0 <= onchain_share <= 1.0:
        raise ValueError("onchain_share must be within [0, 1]")
    params = params or CostParams()
    onchain = estimate(Method.ONCHAIN, Operation.IS_EAI, None, params).gas
    merkle = estimate(Method.MERKLE, Operation.IS_EAI, n, params).gas
    return onchain_share * onchain + (1.0 - onchain_share) * merkle


def _check_gas(method: Method, n: int | None, params: CostParams) -> int:
    if method is Method.ONCHAIN:
        return params.onchain_check_gas
    if method is Method.OFFCHAIN:
        return params.offchain_check_gas
    return int(math.floor(params.merkle_base_gas + params.merkle_per_hash_gas * merkle_depth(n) + 0.5))
