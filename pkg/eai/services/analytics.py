from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Sequence

from eai.services.ingest import (
    MICRO_PER_USD,
    Address,
    AddressList,
    TransferRecord,
    format_usd,
    parse_usd,
    sort_records,
)
from eai.services.proximity import DistanceMap

logger = logging.getLogger(__name__)

DEFAULT_WALLET_BOUNDARIES = "10,1000,100000,10000000"
DEFAULT_TXN_BOUNDARIES = "10,2000,100000,10000000"
_ONE_DECIMAL = Decimal("0.1")


class BucketOverlap(ValueError):
    pass


class EmptyPopulation(ValueError):
    pass


class CellKind(str, Enum):
    COUNT = "count"
    VOLUME = "volume"


@dataclass(frozen=True)
class Bucket:
    """Half-open USD interval [lower, upper); upper None means unbounded."""

    lower_micro: int
    upper_micro: int | None

    def __contains__(self, amount_micro: object) -> bool:
        if not isinstance(amount_micro, int):
            return False
        if amount_micro < self.lower_micro:
            return False
        return self.upper_micro is None or amount_micro < self.upper_micro

    @property
    def label(self) -> str:
        if self.upper_micro is None:
            return f"{_amount_label(self.lower_micro)}+"
        return f"{_amount_label(self.lower_micro)}-{_amount_label(self.upper_micro)}"


@dataclass
class BalanceSummary:
    max_balance: dict[Address, int] = field(default_factory=dict)
    final_balance: dict[Address, int] = field(default_factory=dict)
    underflow_warnings: int = 0

    def __len__(self) -> int:
        return len(self.max_balance)

    def __contains__(self, address: object) -> bool:
        return address in self.max_balance

    def max_usd(self, address: Address | str) -> Decimal:
        return Decimal(self.max_balance[Address.coerce(address)]).scaleb(-6)

    def final_usd(self, address: Address | str) -> Decimal:
        return Decimal(self.final_balance[Address.coerce(address)]).scaleb(-6)

    def population(self, threshold_micro: int) -> list[Address]:
        return sorted(address for address, peak in self.max_balance.items() if peak >= threshold_micro)


@dataclass
class DistanceTable:
    buckets: list[Bucket]
    max_hops: int
    cell_kind: CellKind
    cells: list[list[int]]

    @property
    def columns(self) -> list[str]:
        return [str(hop) for hop in range(self.max_hops + 1)] + [f"{self.max_hops}+"]

    def row_totals(self) -> list[int]:
        return [sum(row) for row in self.cells]

    def column_totals(self) -> list[int]:
        return [sum(column) for column in zip(*self.cells)] if self.cells else []

    def total(self) -> int:
        return sum(self.row_totals())

    def column_shares(self) -> list[Decimal]:
        total = self.total()
        return [percent(value, total) for value in self.column_totals()] if total else []

    def format_cell(self, value: int) -> str:
        return format_usd(value) if self.cell_kind is CellKind.VOLUME else str(value)

    def rows(self) -> list[list[str]]:
        return [
            [bucket.label, *(self.format_cell(value) for value in row)]
            for bucket, row in zip(self.buckets, self.cells)
        ]

    def as_dict(self) -> dict[str, object]:
        return {
            "cell_kind": self.cell_kind.value,
            "columns": self.columns,
            "rows": {row[0]: row[1:] for row in self.rows()},
            "total": self.format_cell(self.total()),
            "column_shares_pct": [str(share) for share in self.column_shares()],
        }


@dataclass(frozen=True)
class SummaryStats:
    population: int
    pct_eai: Decimal
    pct_within_one_hop_of_eai: Decimal
    pct_within_cap: Decimal
    txn_population: int | None = None
    pct_txn_eai: Decimal | None = None

    def as_dict(self) -> dict[str, object]:
        return {
            "population": self.population,
            "pct_eai": str(self.pct_eai),
            "pct_within_one_hop_of_eai": str(self.pct_within_one_hop_of_eai),
            "pct_within_cap": str(self.pct_within_cap),
            "txn_population": self.txn_population,
            "pct_txn_eai": None if self.pct_txn_eai is None else str(self.pct_txn_eai),
        }


@dataclass(frozen=True)
class ExploiterReport:
    histogram: list[int]
    not_found: int
    pct_non_eai: Decimal
    pct_beyond: Decimal
    baseline: list[int]
    max_hops: int = 5

    @property
    def total(self) -> int:
        return sum(self.histogram)

    def as_dict(self) -> dict[str, object]:
        columns = [str(hop) for hop in range(self.max_hops + 1)] + [f"{self.max_hops}+"]
        baseline_total = sum(self.baseline)
        return {
            "total": self.total,
            "not_found": self.not_found,
            "pct_non_eai": str(self.pct_non_eai),
            "pct_beyond": str(self.pct_beyond),
            "histogram": dict(zip(columns, self.histogram)),
            "baseline": dict(zip(columns, self.baseline)),
            "baseline_pct": dict(
                zip(columns, (str(percent(value, baseline_total)) for value in self.baseline))
            )
            if baseline_total
            else {},
        }


def percent(numerator: int, denominator: int) -> Decimal:
    """Percentage rounded half-up to one decimal place."""
    if denominator <= 0:
        raise EmptyPopulation("percentage over an empty population")
    value = Decimal(numerator) * 100 / Decimal(denominator)
    return value.quantize(_ONE_DECIMAL, rounding=ROUND_HALF_UP)


def parse_buckets(boundaries: str | Sequence[Decimal | str | int]) -> list[Bucket]:
    if isinstance(boundaries, str):
        parts = [part.strip() for part in boundaries.split(",") if part.strip()]
    else:
        parts = [str(part) for part in boundaries]
    if not parts:
        raise BucketOverlap("at least one bucket boundary is required")
    try:
        edges = [parse_usd(part) for part in parts]
    except ValueError as exc:
        raise BucketOverlap(str(exc)) from exc
    buckets = [Bucket(lower, upper) for lower, upper in zip(edges, edges[1:])]
    buckets.append(Bucket(edges[-1], None))
    validate_buckets(buckets)
    return buckets


def validate_buckets(buckets: Sequence[Bucket]) -> None:
    for index, bucket in enumerate(buckets):
        if bucket.upper_micro is not None and bucket.upper_micro <= bucket.lower_micro:
            raise BucketOverlap(f"bucket {bucket.label} is empty or inverted")
        if index + 1 < len(buckets):
            following = buckets[index + 1]
            if bucket.upper_micro is None or bucket.upper_micro > following.lower_micro:
                raise BucketOverlap(f"bucket {bucket.label} overlaps {following.label}")


def max_lifetime_balances(
    records: Iterable[TransferRecord],
    token: str | None = None,
) -> BalanceSummary:
    """Replay transfers in ordering-key order; underflow clamps to zero and is counted."""
    balances: dict[Address, int] = defaultdict(int)
    peaks: dict[Address, int] = defaultdict(int)
    underflows = 0
    wanted = token.upper() if token else None
    for record in sort_records(records):
        if wanted is not None and record.token.upper() != wanted:
            continue
        amount = record.amount_micro
        sender = balances[record.sender] - amount
        if sender < 0:
            underflows += 1
            sender = 0
        peaks.setdefault(record.sender, 0)
        if record.sender == record.receiver:
            # a self-transfer moves no value
            continue
        balances[record.sender] = sender

        receiver = balances[record.receiver] + amount
        balances[record.receiver] = receiver
        peaks[record.receiver] = max(peaks[record.receiver], receiver)

    if underflows:
        logger.warning("balance_underflow_clamped count=%s", underflows)
    return BalanceSummary(
        max_balance=dict(peaks),
        final_balance={address: balances[address] for address in peaks},
        underflow_warnings=underflows,
    )


def wallet_distance_table(
    dm: DistanceMap,
    balances: BalanceSummary,
    buckets: Sequence[Bucket] | None = None,
    *,
    eoa: AddressList | None = None,
) -> DistanceTable:
    buckets = list(buckets) if buckets is not None else parse_buckets(DEFAULT_WALLET_BOUNDARIES)
    validate_buckets(buckets)
    table = _empty_table(buckets, dm.max_hops, CellKind.COUNT)
    for address, peak in balances.max_balance.items():
        if eoa is not None and address not in eoa:
            continue
        row = _bucket_index(buckets, peak)
        if row is None:
            continue
        table.cells[row][_column(dm, dm.distance_or_beyond(address))] += 1
    return table


def txn_distance_table(
    dm: DistanceMap,
    records: Iterable[TransferRecord],
    buckets: Sequence[Bucket] | None = None,
    cell_kind: CellKind | str = CellKind.COUNT,
    *,
    direct_only: bool = True,
    token: str | None = None,
) -> DistanceTable:
    buckets = list(buckets) if buckets is not None else parse_buckets(DEFAULT_TXN_BOUNDARIES)
    validate_buckets(buckets)
    kind = CellKind(cell_kind)
    table = _empty_table(buckets, dm.max_hops, kind)
    for record in _eligible(records, direct_only, token):
        row = _bucket_index(buckets, record.amount_micro)
        if row is None:
            continue
        distance = min(dm.distance_or_beyond(record.sender), dm.distance_or_beyond(record.receiver))
        table.cells[row][_column(dm, distance)] += 1 if kind is CellKind.COUNT else record.amount_micro
    return table


def summary_stats(
    dm: DistanceMap,
    balances: BalanceSummary,
    threshold_usd: Decimal | str | int = Decimal("10000"),
    *,
    records: Iterable[TransferRecord] | None = None,
    min_amount_usd: Decimal | str | int = Decimal("2000"),
    direct_only: bool = True,
    token: str | None = None,
) -> SummaryStats:
    population = balances.population(parse_usd(str(threshold_usd)))
    if not population:
        raise EmptyPopulation(f"no wallet reaches the {threshold_usd} USD threshold")
    distances = [dm.distance_or_beyond(address) for address in population]
    eai = sum(1 for distance in distances if distance <= 1)
    near = sum(1 for distance in distances if distance <= 2)
    capped = sum(1 for distance in distances if distance <= dm.max_hops)

    txn_population = None
    pct_txn = None
    if records is not None:
        floor = parse_usd(str(min_amount_usd))
        large = [record for record in _eligible(records, direct_only, token) if record.amount_micro >= floor]
        txn_population = len(large)
        if large:
            involved = sum(
                1
                for record in large
                if min(dm.distance_or_beyond(record.sender), dm.distance_or_beyond(record.receiver)) <= 1
            )
            pct_txn = percent(involved, len(large))

    stats = SummaryStats(
        population=len(population),
        pct_eai=percent(eai, len(population)),
        pct_within_one_hop_of_eai=percent(near, len(population)),
        pct_within_cap=percent(capped, len(population)),
        txn_population=txn_population,
        pct_txn_eai=pct_txn,
    )
    logger.info(
        "summary_stats population=%s pct_eai=%s pct_within_one_hop=%s pct_txn_eai=%s",
        stats.population,
        stats.pct_eai,
        stats.pct_within_one_hop_of_eai,
        stats.pct_txn_eai,
    )
    return stats


def exploiter_report(
    dm: DistanceMap,
    exploiters: AddressList | Iterable[Address],
    *,
    balances: BalanceSummary | None = None,
    threshold_usd: Decimal | str | int = Decimal("10000"),
) -> ExploiterReport:
    members = sorted({Address.coerce(item) for item in exploiters})
    if not members:
        raise EmptyPopulation("exploiter list is empty")
    histogram = [0] * (dm.max_hops + 2)
    not_found = 0
    for address in members:
        node = dm.graph.node_id(address)
        if node is None:
            not_found += 1
            histogram[-1] += 1
            continue
        histogram[_column(dm, int(dm.distances[node]))] += 1
    if not_found:
        logger.warning("exploiters_not_in_graph count=%s", not_found)

    if balances is not None:
        population = balances.population(parse_usd(str(threshold_usd)))
        baseline = [0] * (dm.max_hops + 2)
        for address in population:
            baseline[_column(dm, dm.distance_or_beyond(address))] += 1
    else:
        baseline = dm.histogram()

    total = len(members)
    return ExploiterReport(
        histogram=histogram,
        not_found=not_found,
        pct_non_eai=percent(total - histogram[0] - histogram[1], total),
        pct_beyond=percent(histogram[-1], total),
        baseline=baseline,
        max_hops=dm.max_hops,
    )


def _eligible(
    records: Iterable[TransferRecord],
    direct_only: bool,
    token: str | None,
) -> Iterable[TransferRecord]:
    wanted = token.upper() if token else None
    for record in records:
        if direct_only and not record.direct:
            continue
        if wanted is not None and record.token.upper() != wanted:
            continue
        yield record


def _empty_table(buckets: Sequence[Bucket], max_hops: int, kind: CellKind) -> DistanceTable:
    return DistanceTable(
        buckets=list(buckets),
        max_hops=max_hops,
        cell_kind=kind,
        cells=[[0] * (max_hops + 2) for _ in buckets],
    )


def _bucket_index(buckets: Sequence[Bucket], amount_micro: int) -> int | None:
    for index, bucket in enumerate(buckets):
        if amount_micro in bucket:
            return index
    return None


def _column(dm: DistanceMap, distance: int) -> int:
    return min(distance, dm.beyond)


def _amount_label(micro: int) -> str:
    if micro % MICRO_PER_USD:
        return format_usd(micro).rstrip("0")
    whole = micro // MICRO_PER_USD
    if whole and whole % 1_000_000 == 0:
        return f"{whole // 1_000_000}m"
    if whole and whole % 1_000 == 0:
        return f"{whole // 1_000}k"
    return str(whole)
