"""Hazard identifier scheme: parsing, formatting, and org-scoped allocation.

Identifiers follow ``<PREFIX>-<year>-<number>`` (``ASH-2025-0023``,
``CVE-2024-12345``). ASH and CVE numbers render zero-padded to at least four
digits; other schemes render unpadded. Allocation is backed by a journaled
registry file whose entries are chained by digest so tampering is detectable.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Mapping

from .errors import BadIdFormatError, CorruptJournalError, YearOutOfRangeError

ASH = "ASH"
CVE = "CVE"

YEAR_FLOOR = 1999

_ID_RE = re.compile(r"^([A-Z][A-Z0-9]*)-(\d{4})-(\d+)$")
_PADDED_SCHEMES = frozenset({ASH, CVE})


def _year_ceiling() -> int:
    return date.today().year + 1


@dataclass(frozen=True)
class HazardId:
    """A parsed hazard identifier. Equality ignores the raw source spelling."""

    scheme: str
    year: int
    number: int
    raw: str = field(compare=False, default="")

    def __str__(self) -> str:
        return format_hazard_id(self)


def parse_hazard_id(text: str) -> HazardId:
    match = _ID_RE.match(text)
    if match is None:
        raise BadIdFormatError(
            f"invalid hazard identifier {text!r}: expected <PREFIX>-<year>-<number>"
        )
    scheme, year_text, number_text = match.groups()
    year = int(year_text)
    number = int(number_text)
    if number <= 0:
        raise BadIdFormatError(f"invalid hazard identifier {text!r}: number must be positive")
    if not YEAR_FLOOR <= year <= _year_ceiling():
        raise BadIdFormatError(
            f"invalid hazard identifier {text!r}: year {year} outside "
            f"[{YEAR_FLOOR}, {_year_ceiling()}]"
        )
    return HazardId(scheme=scheme, year=year, number=number, raw=text)


def format_hazard_id(hazard_id: HazardId) -> str:
    if hazard_id.scheme in _PADDED_SCHEMES:
        return f"{hazard_id.scheme}-{hazard_id.year}-{hazard_id.number:04d}"
    return f"{hazard_id.scheme}-{hazard_id.year}-{hazard_id.number}"


@dataclass(frozen=True)
class JournalEntry:
    id: str
    issued_at: str
    summary: str
    prev_digest: str | None
    digest: str


@dataclass(frozen=True)
class IdRegistry:
    namespace: str
    allocated: Mapping[int, int]
    journal: tuple[JournalEntry, ...] = ()


def _entry_digest(id_text: str, issued_at: str, summary: str, prev_digest: str | None) -> str:
    payload = json.dumps(
        {"id": id_text, "issued_at": issued_at, "prev_digest": prev_digest, "summary": summary},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def new_registry(namespace: str = "local") -> IdRegistry:
    return IdRegistry(namespace=namespace, allocated={}, journal=())


def allocate(
    registry: IdRegistry,
    year: int,
    summary: str,
    issued_at: datetime | None = None,
) -> tuple[HazardId, IdRegistry]:
    """Issue the next ASH id for a year; returns the id and the extended registry."""
    if not YEAR_FLOOR <= year <= _year_ceiling():
        raise YearOutOfRangeError(
            f"year {year} outside allocatable range [{YEAR_FLOOR}, {_year_ceiling()}]"
        )
    number = registry.allocated.get(year, 0) + 1
    hazard_id = HazardId(scheme=ASH, year=year, number=number)
    hazard_id = replace(hazard_id, raw=format_hazard_id(hazard_id))
    stamp = issued_at or datetime.now(timezone.utc)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    issued_text = stamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
    prev = registry.journal[-1].digest if registry.journal else None
    entry = JournalEntry(
        id=hazard_id.raw,
        issued_at=issued_text,
        summary=summary,
        prev_digest=prev,
        digest=_entry_digest(hazard_id.raw, issued_text, summary, prev),
    )
    allocated = dict(registry.allocated)
    allocated[year] = number
    updated = IdRegistry(
        namespace=registry.namespace,
        allocated=allocated,
        journal=registry.journal + (entry,),
    )
    return hazard_id, updated


def _replay_allocated(journal: tuple[JournalEntry, ...]) -> dict[int, int]:
    replayed: dict[int, int] = {}
    for entry in journal:
        parsed = parse_hazard_id(entry.id)
        replayed[parsed.year] = max(replayed.get(parsed.year, 0), parsed.number)
    return replayed


def load_registry(path: str | Path, create: bool = False, namespace: str = "local") -> IdRegistry:
    """Load a registry file and verify its journal digest chain."""
    path = Path(path)
    if not path.exists():
        if create:
            return new_registry(namespace)
        raise FileNotFoundError(f"registry file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptJournalError(f"registry file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorruptJournalError(f"registry file {path} must hold a JSON object")

    journal_raw = raw.get("journal", [])
    if not isinstance(journal_raw, list):
        raise CorruptJournalError("journal must be an array")
    journal: list[JournalEntry] = []
    prev: str | None = None
    for index, item in enumerate(journal_raw):
        if not isinstance(item, dict):
            raise CorruptJournalError(f"journal[{index}] is not an object")
        try:
            entry = JournalEntry(
                id=item["id"],
                issued_at=item["issued_at"],
                summary=item["summary"],
                prev_digest=item.get("prev_digest"),
                digest=item["digest"],
            )
        except KeyError as exc:
            raise CorruptJournalError(f"journal[{index}] missing field {exc}") from exc
        if entry.prev_digest != prev:
            raise CorruptJournalError(f"journal[{index}] breaks the chain: bad prev_digest")
        expected = _entry_digest(entry.id, entry.issued_at, entry.summary, entry.prev_digest)
        if entry.digest != expected:
            raise CorruptJournalError(f"journal[{index}] digest mismatch")
        journal.append(entry)
        prev = entry.digest

    allocated_raw = raw.get("allocated", {})
    if not isinstance(allocated_raw, dict):
        raise CorruptJournalError("allocated must be an object")
    allocated = {int(year): int(number) for year, number in allocated_raw.items()}
    if allocated != _replay_allocated(tuple(journal)):
        raise CorruptJournalError("allocated map does not replay from the journal")

    return IdRegistry(
        namespace=str(raw.get("namespace", namespace)),
        allocated=allocated,
        journal=tuple(journal),
    )


def store_registry(registry: IdRegistry, path: str | Path) -> None:
    """Write the registry atomically (write temp, then rename)."""
    path = Path(path)
    payload = {
        "namespace": registry.namespace,
        "allocated": {str(year): number for year, number in sorted(registry.allocated.items())},
        "journal": [
            {
                "id": entry.id,
                "issued_at": entry.issued_at,
                "summary": entry.summary,
                "prev_digest": entry.prev_digest,
                "digest": entry.digest,
            }
            for entry in registry.journal
        ],
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)
