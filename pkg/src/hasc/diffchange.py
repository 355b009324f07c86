"""Structural card diffs, safety-change classification, and changelog entries.

Diffs are computed over canonical card trees. Lists with stable identity
(hazards by id; guardrails, models, and components by name) diff by key so a
reordered or appended entry does not produce noise; all other lists diff
positionally. When a keyed list reorders its surviving elements the whole
list is reported as one change, keeping the diff mechanically applicable.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Any

from .errors import CardIdMismatchError
from .fieldpath import Segment, format_path
from .identifiers import HazardId
from .model import CardVersion, SystemCard, VersionHistoryEntry, card_to_tree

# Logical list paths with a stable identity key.
_KEYED_LISTS: dict[tuple[str, ...], str] = {
    ("hazard_log",): "id",
    ("guardrails",): "name",
    ("blueprint", "components"): "name",
    ("blueprint", "models"): "name",
}

# Top-level card fields mapped to the section labels used in changelog
# "affected components" lines.
_SECTION_LABELS = {
    "blueprint": "System blueprint",
    "intent": "Intent and scope",
    "provenance": "Provenance",
    "evaluations": "Evaluations",
    "limitations": "Limitations",
    "hazard_log": "Hazard log",
    "guardrails": "Guardrails",
    "remediations": "Remediations",
    "governance": "Governance",
    "optional_components": "Optional components",
    "references": "References",
}

_BOOKKEEPING_ROOTS = {"version", "published", "history"}


@dataclass(frozen=True)
class GuardrailChange:
    name: str
    old_version: str | None
    new_version: str | None


@dataclass(frozen=True)
class ModelChange:
    name: str
    old_version: str | None
    new_version: str | None


@dataclass(frozen=True)
class CardDiff:
    added: tuple[tuple[str, Any], ...] = ()
    removed: tuple[tuple[str, Any], ...] = ()
    changed: tuple[tuple[str, Any, Any], ...] = ()
    hazards_added: tuple[HazardId, ...] = ()
    hazards_removed: tuple[HazardId, ...] = ()
    guardrail_changes: tuple[GuardrailChange, ...] = ()
    model_changes: tuple[ModelChange, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.changed)

    def touched_paths(self) -> tuple[str, ...]:
        return tuple(
            [path for path, _ in self.added]
            + [path for path, _ in self.removed]
            + [path for path, _, _ in self.changed]
        )

    def to_tree(self) -> dict:
        return {
            "added": [{"path": p, "value": v} for p, v in self.added],
            "removed": [{"path": p, "value": v} for p, v in self.removed],
            "changed": [{"path": p, "old": o, "new": n} for p, o, n in self.changed],
            "hazards_added": [str(h) for h in self.hazards_added],
            "hazards_removed": [str(h) for h in self.hazards_removed],
            "guardrail_changes": [
                {"name": c.name, "old_version": c.old_version, "new_version": c.new_version}
                for c in self.guardrail_changes
            ],
            "model_changes": [
                {"name": c.name, "old_version": c.old_version, "new_version": c.new_version}
                for c in self.model_changes
            ],
        }


class _Collector:
    def __init__(self) -> None:
        self.added: list[tuple[str, Any]] = []
        self.removed: list[tuple[str, Any]] = []
        self.changed: list[tuple[str, Any, Any]] = []


def _logical(path: tuple[Segment, ...]) -> tuple[str, ...]:
    return tuple(seg for seg in path if isinstance(seg, str))


def _keyable(items: list, key: str) -> bool:
    keys = []
    for item in items:
        if not isinstance(item, dict) or key not in item:
            return False
        keys.append(item[key])
    return len(set(keys)) == len(keys)


def _walk(old: Any, new: Any, path: tuple[Segment, ...], out: _Collector) -> None:
    if old == new:
        return
    if isinstance(old, dict) and isinstance(new, dict):
        for key in sorted(set(old) | set(new)):
            seg_path = path + (key,)
            if key not in new:
                out.removed.append((format_path(seg_path), old[key]))
            elif key not in old:
                out.added.append((format_path(seg_path), new[key]))
            else:
                _walk(old[key], new[key], seg_path, out)
        return
    if isinstance(old, list) and isinstance(new, list):
        key = _KEYED_LISTS.get(_logical(path))
        if key is not None and _keyable(old, key) and _keyable(new, key):
            if _walk_keyed(old, new, key, path, out):
                return
            out.changed.append((format_path(path), old, new))
            return
        for idx in range(min(len(old), len(new))):
            _walk(old[idx], new[idx], path + (idx,), out)
        for idx in range(len(new), len(old)):
            out.removed.append((format_path(path + (idx,)), old[idx]))
        for idx in range(len(old), len(new)):
            out.added.append((format_path(path + (idx,)), new[idx]))
        return
    out.changed.append((format_path(path), old, new))


def _walk_keyed(
    old: list, new: list, key: str, path: tuple[Segment, ...], out: _Collector
) -> bool:
    """Diff keyed lists; returns False when only a wholesale change is sound."""
    old_keys = [item[key] for item in old]
    new_keys = [item[key] for item in new]
    old_set = set(old_keys)
    new_set = set(new_keys)
    common_old = [k for k in old_keys if k in new_set]
    common_new = [k for k in new_keys if k in old_set]
    if common_old != common_new:
        return False  # surviving elements were reordered
    added_keys = [k for k in new_keys if k not in old_set]
    if added_keys and new_keys[-len(added_keys) :] != added_keys:
        return False  # insertion in the middle; appends only are patchable
    old_by_key = {item[key]: item for item in old}
    new_by_key = {item[key]: item for item in new}
    for k in old_keys:
        if k not in new_set:
            out.removed.append((format_path(path + ((key, str(k)),)), old_by_key[k]))
    for k in common_old:
        _walk(old_by_key[k], new_by_key[k], path + ((key, str(k)),), out)
    for k in added_keys:
        out.added.append((format_path(path + ((key, str(k)),)), new_by_key[k]))
    return True


def _version_changes(old_items: tuple, new_items: tuple, cls: type) -> tuple:
    old_by_name = {item.name: item for item in old_items}
    new_by_name = {item.name: item for item in new_items}
    changes = []
    for name, item in old_by_name.items():
        if name not in new_by_name:
            changes.append(cls(name=name, old_version=item.version, new_version=None))
        elif item.version != new_by_name[name].version:
            changes.append(
                cls(name=name, old_version=item.version, new_version=new_by_name[name].version)
            )
    for name, item in new_by_name.items():
        if name not in old_by_name:
            changes.append(cls(name=name, old_version=None, new_version=item.version))
    return tuple(changes)


def diff_cards(old: SystemCard, new: SystemCard) -> CardDiff:
    """Path-level diff of two versions of the same card."""
    if old.card_id != new.card_id:
        raise CardIdMismatchError(
            f"cannot diff different systems: {old.card_id!r} vs {new.card_id!r}"
        )
    out = _Collector()
    _walk(card_to_tree(old), card_to_tree(new), (), out)

    old_ids = [entry.id for entry in old.hazard_log]
    new_ids = [entry.id for entry in new.hazard_log]
    return CardDiff(
        added=tuple(out.added),
        removed=tuple(out.removed),
        changed=tuple(out.changed),
        hazards_added=tuple(h for h in new_ids if h not in old_ids),
        hazards_removed=tuple(h for h in old_ids if h not in new_ids),
        guardrail_changes=_version_changes(old.guardrails, new.guardrails, GuardrailChange),
        model_changes=_version_changes(
            old.blueprint.models, new.blueprint.models, ModelChange
        ),
    )


def classify_change(diff: CardDiff | None) -> tuple[str, str]:
    """Derive (change_type, change_label) from a diff; None means no predecessor."""
    if diff is None:
        return "major", "initial release"
    model_removed = any(c.new_version is None for c in diff.model_changes)
    model_added = any(c.old_version is None for c in diff.model_changes)
    intent_touched = any(path.startswith("intent") for path in diff.touched_paths())
    if (model_removed and model_added) or intent_touched:
        return "major", "breaking change"
    if diff.is_empty:
        return "minor", "no functional change"
    if diff.hazards_added or diff.guardrail_changes:
        return "minor", "safety enhancement"
    substantive = [
        path
        for path in diff.touched_paths()
        if path.split(".")[0].split("[")[0] not in _BOOKKEEPING_ROOTS
    ]
    if any(path.startswith("evaluations") for path in substantive):
        return "minor", "performance tuning"
    if not substantive:
        return "minor", "no functional change"
    return "minor", "maintenance"


def _affected_sections(diff: CardDiff) -> tuple[str, ...]:
    roots = []
    for path in diff.touched_paths():
        root = path.split(".")[0].split("[")[0]
        label = _SECTION_LABELS.get(root)
        if label and label not in roots:
            roots.append(label)
    return tuple(sorted(roots, key=list(_SECTION_LABELS.values()).index))


def _draft_summary(diff: CardDiff | None, label: str) -> str:
    if diff is None:
        return "First public release of the system."
    parts: list[str] = []
    if diff.hazards_added:
        ids = ", ".join(str(h) for h in diff.hazards_added)
        parts.append(f"added {ids} to the hazard log")
    if diff.guardrail_changes:
        names = ", ".join(sorted(c.name for c in diff.guardrail_changes))
        parts.append(f"updated guardrails: {names}")
    if diff.model_changes:
        names = ", ".join(sorted(c.name for c in diff.model_changes))
        parts.append(f"changed models: {names}")
    if not parts:
        sections = _affected_sections(diff)
        if sections:
            parts.append("updated " + ", ".join(sections).lower())
        else:
            parts.append(label)
    text = "; ".join(parts)
    return text[0].upper() + text[1:] + "."


def make_changelog_entry(
    diff: CardDiff | None,
    new_version: CardVersion,
    published: date,
    incident_link: str | None = None,
    summary: str | None = None,
) -> VersionHistoryEntry:
    """Draft the history entry for a release from its diff."""
    change_type, change_label = classify_change(diff)
    return VersionHistoryEntry(
        version=new_version,
        published=published,
        change_type=change_type,
        change_label=change_label,
        summary=summary if summary is not None else _draft_summary(diff, change_label),
        associated_hazards=() if diff is None else diff.hazards_added,
        affected_components=() if diff is None else _affected_sections(diff),
        incident_link=incident_link,
    )
