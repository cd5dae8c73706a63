from __future__ import annotations

from pathlib import Path

import pytest

from eai.services.ingest import Address, AddressRole, TransferRecord, load_address_list, load_transfers, parse_usd

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def addr(suffix: str) -> Address:
    """Fixture address 0x00..00<suffix>."""
    return Address.parse("0x" + suffix.rjust(40, "0"))


def transfer(key: int, sender: str, receiver: str, usd: int | str, **kwargs) -> TransferRecord:
    return TransferRecord(key, addr(sender), addr(receiver), parse_usd(str(usd)), **kwargs)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def fixture_records() -> list[TransferRecord]:
    return load_transfers(FIXTURES / "transfers.csv").records


@pytest.fixture
def exchanges():
    return load_address_list(FIXTURES / "exchanges.txt", AddressRole.EXCHANGE)


@pytest.fixture
def exclusions():
    return load_address_list(FIXTURES / "exclusions.txt", AddressRole.EXCLUSION)


@pytest.fixture
def exploiters():
    return load_address_list(FIXTURES / "exploiters.txt", AddressRole.EXPLOITER)


@pytest.fixture
def chain_records() -> list[TransferRecord]:
    """E -> A -> B -> C -> D -> F -> G, plus X -> E carrying $8 (below the default edge threshold)."""
    return [
        transfer(1, "ee", "aa", 50),
        transfer(2, "aa", "bb", 20),
        transfer(3, "bb", "cc", 15),
        transfer(4, "cc", "dd", 12),
        transfer(5, "dd", "ff", 11),
        transfer(6, "ff", "99", 10),
        transfer(7, "88", "ee", 8),
    ]
