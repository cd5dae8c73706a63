from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import IO, Any, Iterable

from eth_utils import is_hex_address, to_canonical_address

logger = logging.getLogger(__name__)

MICRO_PER_USD = 1_000_000
TRANSFER_COLUMNS = ("ordering_key", "from", "to", "amount_usd", "token", "direct")
_TRUE_VALUES = {"true", "1", "yes"}
_FALSE_VALUES = {"false", "0", "no"}


class MalformedRow(ValueError):
    def __init__(self, line: int, reason: str, source: str = "<stream>") -> None:
        super().__init__(f"{source}:{line}: {reason}")
        self.line = line
        self.reason = reason
        self.source = source


class AddressRole(str, Enum):
    EXCHANGE = "exchange"
    EXPLOITER = "exploiter"
    EXCLUSION = "exclusion"
    EOA = "eoa"
    EAI = "eai"


@dataclass(frozen=True, order=True, slots=True)
class Address:
    raw: bytes

    def __post_init__(self) -> None:
        if len(self.raw) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(self.raw)}")

    @classmethod
    def parse(cls, text: str) -> Address:
        value = text.strip()
        if not is_hex_address(value):
            raise ValueError(f"not a 20-byte hex address: {value!r}")
        return cls(to_canonical_address(value))

    @classmethod
    def coerce(cls, value: Address | str | bytes) -> Address:
        if isinstance(value, Address):
            return value
        if isinstance(value, bytes):
            return cls(value)
        return cls.parse(value)

    def __str__(self) -> str:
        return "0x" + self.raw.hex()

    def __repr__(self) -> str:
        return f"Address({self})"


@dataclass(frozen=True, slots=True)
class TransferRecord:
    ordering_key: int
    sender: Address
    receiver: Address
    amount_micro: int
    token: str = "USDC"
    direct: bool = True
    row: int = 0

    @property
    def amount_usd(self) -> Decimal:
        return Decimal(self.amount_micro).scaleb(-6)


@dataclass(frozen=True)
class AddressList:
    role: AddressRole
    members: frozenset[Address] = field(default_factory=frozenset)

    def __contains__(self, item: object) -> bool:
        return item in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    @classmethod
    def of(cls, role: AddressRole | str, addresses: Iterable[Address | str]) -> AddressList:
        return cls(AddressRole(role), frozenset(Address.coerce(item) for item in addresses))


@dataclass
class IngestResult:
    records: list[TransferRecord]
    errors: list[MalformedRow]
    data_rows: int


def parse_usd(text: str) -> int:
    """Fixed-point USD text to integer micro-USD (6 fractional digits max)."""
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation as exc:
        raise ValueError(f"invalid amount {text!r}") from exc
    if not value.is_finite():
        raise ValueError(f"invalid amount {text!r}")
    if value < 0:
        raise ValueError(f"negative amount {text!r}")
    micro = value.scaleb(6)
    if micro != micro.to_integral_value():
        raise ValueError(f"amount {text!r} has more than 6 fractional digits")
    return int(micro)


def format_usd(micro: int) -> str:
    return f"{micro // MICRO_PER_USD}.{micro % MICRO_PER_USD:06d}"


def parse_transfers(
    stream: IO[bytes] | IO[str],
    format: str = "csv",
    *,
    strict: bool = False,
    source: str = "<stream>",
) -> IngestResult:
    text = _as_text(stream)
    if format == "csv":
        rows = _csv_rows(text, source)
    elif format == "jsonl":
        rows = _jsonl_rows(text, source)
    else:
        raise ValueError(f"unsupported transfer format {format!r}")

    records: list[TransferRecord] = []
    errors: list[MalformedRow] = []
    data_rows = 0
    for line, row in rows:
        data_rows += 1
        try:
            if isinstance(row, MalformedRow):
                raise row
            records.append(_record_from_row(row, line, source))
        except MalformedRow as exc:
            if strict:
                raise
            errors.append(exc)

    if errors:
        logger.warning(
            "ingest_malformed_rows source=%s errors=%s first=%s",
            source,
            len(errors),
            errors[0],
        )
    logger.info("ingest_complete source=%s records=%s errors=%s", source, len(records), len(errors))
    return IngestResult(records=records, errors=errors, data_rows=data_rows)


def load_transfers(path: Path, format: str | None = None, *, strict: bool = False) -> IngestResult:
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix.lower() in {".jsonl", ".ndjson"} else "csv")
    with path.open("rb") as handle:
        return parse_transfers(handle, fmt, strict=strict, source=str(path))


def parse_address_list(
    stream: IO[bytes] | IO[str],
    role: AddressRole | str,
    *,
    source: str = "<stream>",
) -> AddressList:
    members: set[Address] = set()
    for line_no, line in enumerate(_as_text(stream).splitlines(), start=1):
        value = line.strip()
        if not value or value.startswith("#"):
            continue
        try:
            members.add(Address.parse(value))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc), source) from exc
    return AddressList(AddressRole(role), frozenset(members))


def load_address_list(path: Path, role: AddressRole | str) -> AddressList:
    path = Path(path)
    with path.open("rb") as handle:
        return parse_address_list(handle, role, source=str(path))


def sort_records(records: Iterable[TransferRecord]) -> list[TransferRecord]:
    # sorted() is stable, so equal ordering keys keep input order
    return sorted(records, key=lambda record: record.ordering_key)


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _as_text(stream: IO[bytes] | IO[str]) -> str:
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _csv_rows(text: str, source: str) -> Iterable[tuple[int, dict[str, Any] | MalformedRow]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return
    header = [column.strip() for column in header]
    missing = [column for column in TRANSFER_COLUMNS if column not in header]
    if missing:
        raise MalformedRow(1, f"header missing columns {','.join(missing)}", source)
    for values in reader:
        line = reader.line_num
        if not values or all(not value.strip() for value in values):
            continue
        if len(values) != len(header):
            yield line, MalformedRow(line, f"expected {len(header)} fields, got {len(values)}", source)
            continue
        yield line, dict(zip(header, values))


def _jsonl_rows(text: str, source: str) -> Iterable[tuple[int, dict[str, Any] | MalformedRow]]:
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_no, MalformedRow(line_no, f"invalid JSON: {exc.msg}", source)
            continue
        if not isinstance(payload, dict):
            yield line_no, MalformedRow(line_no, "expected a JSON object", source)
            continue
        yield line_no, payload


def _record_from_row(row: dict[str, Any], line: int, source: str) -> TransferRecord:
    for column in TRANSFER_COLUMNS:
        value = row.get(column)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise MalformedRow(line, f"missing field {column}", source)
    try:
        ordering_key = int(str(row["ordering_key"]).strip())
        if ordering_key < 0:
            raise ValueError(f"negative ordering_key {ordering_key}")
        sender = Address.parse(str(row["from"]))
        receiver = Address.parse(str(row["to"]))
        amount_micro = parse_usd(str(row["amount_usd"]))
        direct = _parse_bool(row["direct"])
    except ValueError as exc:
        raise MalformedRow(line, str(exc), source) from exc
    return TransferRecord(
        ordering_key=ordering_key,
        sender=sender,
        receiver=receiver,
        amount_micro=amount_micro,
        token=str(row["token"]).strip().upper(),
        direct=direct,
        row=line,
    )


def _parse_bool(value: object) -> bool:
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise ValueError(f"invalid boolean {value!r}")
