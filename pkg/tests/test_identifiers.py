import json
import random
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hasc.errors import BadIdFormatError, CorruptJournalError, YearOutOfRangeError
from hasc.identifiers import (
    HazardId,
    IdRegistry,
    allocate,
    format_hazard_id,
    load_registry,
    new_registry,
    parse_hazard_id,
    store_registry,
)

MALFORMED_IDS = [
    "",
    "ASH",
    "ASH-2025",
    "ASH-2025-",
    "-2025-0001",
    "ASH-25-1",
    "ASH-20251-0001",
    "ASH-2025-0001-extra",
    "ASH_2025_0001",
    "ash-2025-0001",
    "ASH-2025-abc",
    "ASH-year-0001",
    "ASH-2025-0000",
    "ASH-2025--1",
    "ASH--2025-0001",
    "ASH 2025 0001",
    "CVE-1998-0001",
    "ASH-1898-0001",
    "ASH-9999-0001",
    "ASH-2025-0001 ",
    " ASH-2025-0001",
    "ASH-2025-1.5",
]


def test_parse_paper_example():
    parsed = parse_hazard_id("ASH-2025-0023")
    assert (parsed.scheme, parsed.year, parsed.number) == ("ASH", 2025, 23)
    assert parsed.raw == "ASH-2025-0023"


def test_parse_cve():
    parsed = parse_hazard_id("CVE-2024-12345")
    assert (parsed.scheme, parsed.year, parsed.number) == ("CVE", 2024, 12345)


@pytest.mark.parametrize("bad", MALFORMED_IDS)
def test_malformed_ids_rejected(bad):
    with pytest.raises(BadIdFormatError):
        parse_hazard_id(bad)


def test_format_padding():
    assert format_hazard_id(HazardId("ASH", 2025, 23)) == "ASH-2025-0023"
    assert format_hazard_id(HazardId("ASH", 2025, 142)) == "ASH-2025-0142"
    assert format_hazard_id(HazardId("CVE", 2024, 12345)) == "CVE-2024-12345"
    assert format_hazard_id(HazardId("ASH", 2025, 123456)) == "ASH-2025-123456"


def test_equality_ignores_raw():
    assert parse_hazard_id("ASH-2025-0023") == HazardId("ASH", 2025, 23)


@given(
    scheme=st.sampled_from(["ASH", "CVE"]),
    year=st.integers(min_value=1999, max_value=2026),
    number=st.integers(min_value=1, max_value=9999999),
)
def test_parse_format_bijection(scheme, year, number):
    hazard_id = HazardId(scheme, year, number)
    text = format_hazard_id(hazard_id)
    parsed = parse_hazard_id(text)
    assert (parsed.scheme, parsed.year, parsed.number) == (scheme, year, number)
    assert format_hazard_id(parsed) == text


def test_allocate_first():
    hazard_id, registry = allocate(new_registry(), 2025, "first")
    assert format_hazard_id(hazard_id) == "ASH-2025-0001"
    assert registry.allocated == {2025: 1}
    assert len(registry.journal) == 1


def test_allocate_after_142():
    registry = new_registry()
    for _ in range(142):
        _, registry = allocate(registry, 2025, "seed")
    hazard_id, _ = allocate(registry, 2025, "next")
    assert format_hazard_id(hazard_id) == "ASH-2025-0143"


def test_allocate_year_out_of_range():
    with pytest.raises(YearOutOfRangeError):
        allocate(new_registry(), 1898, "too old")


def test_allocation_monotonic_no_gaps():
    registry = new_registry()
    rng = random.Random(3)
    numbers = []
    for _ in range(25):
        year = rng.choice([2024, 2025])
        hazard_id, registry = allocate(registry, year, "x")
        if year == 2025:
            numbers.append(hazard_id.number)
    assert numbers == list(range(1, len(numbers) + 1))


def test_registry_round_trip(tmp_path):
    registry = new_registry("acme")
    for index in range(5):
        _, registry = allocate(
            registry, 2025, f"hazard {index}", issued_at=datetime.now(timezone.utc)
        )
    path = tmp_path / "ash-registry.json"
    store_registry(registry, path)
    loaded = load_registry(path)
    assert loaded == registry


def test_registry_journal_replay(tmp_path):
    registry = new_registry()
    for year in (2024, 2025, 2025):
        _, registry = allocate(registry, year, "entry")
    path = tmp_path / "r.json"
    store_registry(registry, path)
    raw = json.loads(path.read_text())
    assert raw["allocated"] == {"2024": 1, "2025": 2}


def test_registry_truncated_file(tmp_path):
    path = tmp_path / "r.json"
    path.write_text('{"namespace": "x", "journal": [')
    with pytest.raises(CorruptJournalError):
        load_registry(path)


def test_registry_tampered_journal(tmp_path):
    registry = new_registry()
    for _ in range(3):
        _, registry = allocate(registry, 2025, "entry")
    path = tmp_path / "r.json"
    store_registry(registry, path)
    raw = json.loads(path.read_text())
    raw["journal"][1]["summary"] = "rewritten history"
    path.write_text(json.dumps(raw))
    with pytest.raises(CorruptJournalError):
        load_registry(path)


def test_registry_allocated_map_must_replay(tmp_path):
    registry = new_registry()
    _, registry = allocate(registry, 2025, "entry")
    path = tmp_path / "r.json"
    store_registry(registry, path)
    raw = json.loads(path.read_text())
    raw["allocated"]["2025"] = 99
    path.write_text(json.dumps(raw))
    with pytest.raises(CorruptJournalError):
        load_registry(path)


def test_registry_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_registry(tmp_path / "absent.json")
    registry = load_registry(tmp_path / "absent.json", create=True, namespace="acme")
    assert registry == IdRegistry(namespace="acme", allocated={}, journal=())


def test_store_is_atomic(tmp_path):
    path = tmp_path / "r.json"
    registry = new_registry()
    _, registry = allocate(registry, 2025, "entry")
    store_registry(registry, path)
    assert not (tmp_path / "r.json.tmp").exists()
    assert load_registry(path) == registry
