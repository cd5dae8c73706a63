from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable

from eai.services.ingest import Address, MalformedRow, TransferRecord, format_usd, parse_usd

logger = logging.getLogger(__name__)

EAI_FLAG_BIT = 255
EXCHANGE_FLAG_BIT = 254
EAI_FLAG = 1 << EAI_FLAG_BIT
EXCHANGE_FLAG = 1 << EXCHANGE_FLAG_BIT
BALANCE_MASK = (1 << EXCHANGE_FLAG_BIT) - 1
WORD_MASK = (1 << 256) - 1
SCRIPT_OPS = ("mint", "transfer", "set_exchange")


class BalanceOverflow(OverflowError):
    pass


class InsufficientBalance(ValueError):
    pass


@dataclass(frozen=True)
class PackedAccount:
    """One 256-bit storage word: EAI flag, exchange flag, then a 254-bit balance."""

    word: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.word <= WORD_MASK:
            raise ValueError("account word must fit in 256 bits")

    @property
    def balance(self) -> int:
        return self.word & BALANCE_MASK

    @property
    def is_eai(self) -> bool:
        return bool(self.word & EAI_FLAG)

    @property
    def is_exchange(self) -> bool:
        return bool(self.word & EXCHANGE_FLAG)

    def with_balance(self, balance: int) -> PackedAccount:
        if not 0 <= balance <= BALANCE_MASK:
            raise BalanceOverflow(f"balance {balance} does not fit in {EXCHANGE_FLAG_BIT} bits")
        return PackedAccount((self.word & ~BALANCE_MASK & WORD_MASK) | balance)

    def with_flag(self, flag: int, enabled: bool) -> PackedAccount:
        return PackedAccount(self.word | flag if enabled else self.word & ~flag & WORD_MASK)


@dataclass(frozen=True)
class LedgerEvent:
    seq: int
    kind: str
    sender: Address | None
    receiver: Address | None
    amount_micro: int = 0
    flagged: bool = False


@dataclass(frozen=True)
class LedgerOp:
    op: str
    sender: Address | None = None
    receiver: Address | None = None
    amount_micro: int = 0
    flag: bool = False
    suppress_flag: bool = False
    line: int = 0


@dataclass
class SimLedger:
    accounts: dict[Address, PackedAccount] = field(default_factory=dict)
    events: list[LedgerEvent] = field(default_factory=list)

    def account(self, address: Address | str) -> PackedAccount:
        return self.accounts.get(Address.coerce(address), PackedAccount())

    def balance(self, address: Address | str) -> int:
        return self.account(address).balance

    def is_eai_flag(self, address: Address | str) -> bool:
        return self.account(address).is_eai

    def is_exchange_flag(self, address: Address | str) -> bool:
        return self.account(address).is_exchange

    def mint(self, to: Address | str, amount_micro: int) -> SimLedger:
        to = Address.coerce(to)
        if amount_micro < 0:
            raise ValueError("mint amount must be >= 0")
        account = self.account(to)
        self.accounts[to] = account.with_balance(account.balance + amount_micro)
        self._log("mint", None, to, amount_micro)
        return self

    def set_exchange(self, address: Address | str, flag: bool = True) -> SimLedger:
        address = Address.coerce(address)
        self.accounts[address] = self.account(address).with_flag(EXCHANGE_FLAG, flag)
        self._log("set_exchange", address, None, 0, flagged=flag)
        return self

    def transfer(
        self,
        sender: Address | str,
        receiver: Address | str,
        amount_micro: int,
        *,
        suppress_flag: bool = False,
    ) -> SimLedger:
        sender = Address.coerce(sender)
        receiver = Address.coerce(receiver)
        if amount_micro < 0:
            raise ValueError("transfer amount must be >= 0")
        source = self.account(sender)
        if source.balance < amount_micro:
            raise InsufficientBalance(
                f"{sender} holds {format_usd(source.balance)}, cannot send {format_usd(amount_micro)}"
            )
        debited = source.with_balance(source.balance - amount_micro)
        target = debited if receiver == sender else self.account(receiver)
        target = target.with_balance(target.balance + amount_micro)
        flagged = source.is_exchange and not suppress_flag
        if flagged:
            target = target.with_flag(EAI_FLAG, True)
        # both words are computed before either is stored
        self.accounts[sender] = debited
        self.accounts[receiver] = target
        self._log("transfer", sender, receiver, amount_micro, flagged=flagged)
        return self

    def total_supply(self) -> int:
        return sum(account.balance for account in self.accounts.values())

    def eai_set(self) -> set[Address]:
        return {
            address for address, account in self.accounts.items() if account.is_eai or account.is_exchange
        }

    def dump(self) -> dict[str, dict[str, object]]:
        return {
            str(address): {
                "balance": format_usd(account.balance),
                "is_eai": account.is_eai,
                "is_exchange": account.is_exchange,
            }
            for address, account in sorted(self.accounts.items())
        }

    def _log(
        self,
        kind: str,
        sender: Address | None,
        receiver: Address | None,
        amount_micro: int,
        flagged: bool = False,
    ) -> None:
        self.events.append(LedgerEvent(len(self.events), kind, sender, receiver, amount_micro, flagged))


def parse_script(stream: IO[str] | IO[bytes], *, source: str = "<script>") -> list[LedgerOp]:
    data = stream.read()
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    header = [column.strip() for column in reader.fieldnames or []]
    missing = [column for column in ("op", "from", "to", "amount") if column not in header]
    if missing:
        raise MalformedRow(1, f"script header missing columns {','.join(missing)}", source)
    reader.fieldnames = header
    ops: list[LedgerOp] = []
    for row in reader:
        line = reader.line_num
        try:
            ops.append(_op_from_row(row, line))
        except ValueError as exc:
            raise MalformedRow(line, str(exc), source) from exc
    return ops


def replay(ops: Iterable[LedgerOp], ledger: SimLedger | None = None, *, strict: bool = True) -> SimLedger:
    ledger = ledger if ledger is not None else SimLedger()
    failures = 0
    for op in ops:
        try:
            if op.op == "mint":
                ledger.mint(op.receiver, op.amount_micro)
            elif op.op == "set_exchange":
                ledger.set_exchange(op.sender, op.flag)
            else:
                ledger.transfer(op.sender, op.receiver, op.amount_micro, suppress_flag=op.suppress_flag)
        except (InsufficientBalance, BalanceOverflow) as exc:
            if strict:
                raise type(exc)(f"line {op.line}: {exc}") from exc
            failures += 1
            logger.warning("ledger_op_rejected line=%s op=%s reason=%s", op.line, op.op, exc)
    logger.info(
        "ledger_replayed events=%s accounts=%s eai=%s rejected=%s",
        len(ledger.events),
        len(ledger.accounts),
        len(ledger.eai_set()),
        failures,
    )
    return ledger


def script_transfers(ops: Iterable[LedgerOp]) -> list[TransferRecord]:
    return [
        TransferRecord(
            ordering_key=index,
            sender=op.sender,
            receiver=op.receiver,
            amount_micro=op.amount_micro,
            row=op.line,
        )
        for index, op in enumerate(ops)
        if op.op == "transfer"
    ]


def _op_from_row(row: dict[str, str | None], line: int) -> LedgerOp:
    op = (row.get("op") or "").strip().lower()
    if op not in SCRIPT_OPS:
        raise ValueError(f"unknown op {op!r}; expected one of {', '.join(SCRIPT_OPS)}")
    sender = _optional_address(row.get("from"))
    receiver = _optional_address(row.get("to"))
    amount = (row.get("amount") or "").strip()
    suppress = _flag(row.get("suppress_flag") or "0")

    if op == "set_exchange":
        target = sender or receiver
        if target is None:
            raise ValueError("set_exchange needs an address in from or to")
        return LedgerOp(op, sender=target, flag=_flag(amount or "1"), line=line)
    if op == "mint":
        if receiver is None:
            raise ValueError("mint needs a to address")
        return LedgerOp(op, receiver=receiver, amount_micro=parse_usd(amount), line=line)
    if sender is None or receiver is None:
        raise ValueError("transfer needs from and to addresses")
    return LedgerOp(op, sender, receiver, parse_usd(amount), suppress_flag=suppress, line=line)


def _optional_address(value: str | None) -> Address | None:
    value = (value or "").strip()
    return Address.parse(value) if value else None


def _flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in {"1", "true", "yes"}:
        return True
    if lowered in {"0", "false", "no", ""}:
        return False
    raise ValueError(f"invalid flag {value!r}")
