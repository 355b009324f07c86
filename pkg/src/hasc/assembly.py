"""Build-time card assembly: merge per-stage fragments and apply the template.

Fragments are YAML files emitted by pipeline stages; each carries a partial
card tree under ``payload``. Merging is a deep union: maps merge recursively,
lists accumulate as an order-preserving union (entries already present are
not repeated, which keeps the merge idempotent and associative), and scalar
conflicts between stages are hard errors -- the card is an audit artifact,
so a silent overwrite would falsify provenance.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import yaml

from .errors import (
    CardContractError,
    CardSyntaxError,
    EmptyInputError,
    MergeConflictError,
    MissingPipelineFieldError,
)
from .fieldpath import has_path
from .model import SystemCard, card_from_tree, serialize


@dataclass(frozen=True)
class Fragment:
    stage: str
    payload: dict
    produced_at: datetime


@dataclass(frozen=True)
class Template:
    defaults: dict
    required_from_pipeline: tuple[str, ...] = ()


def load_fragment(path: str | Path) -> Fragment:
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise CardSyntaxError(
            f"fragment {path}: {getattr(exc, 'problem', None) or exc}",
            line=None if mark is None else mark.line + 1,
            column=None if mark is None else mark.column + 1,
        ) from exc
    if not isinstance(tree, dict):
        raise CardContractError("fragment file must hold an object", path=str(path))
    for key in ("stage", "produced_at", "payload"):
        if key not in tree:
            raise CardContractError(f"fragment missing {key!r}", path=str(path))
    produced = tree["produced_at"]
    if isinstance(produced, str):
        text = produced[:-1] + "+00:00" if produced.endswith("Z") else produced
        produced = datetime.fromisoformat(text)
    if not isinstance(produced, datetime):
        raise CardContractError("produced_at must be a timestamp", path=str(path))
    if produced.tzinfo is None:
        produced = produced.replace(tzinfo=timezone.utc)
    payload = tree["payload"]
    if not isinstance(payload, dict):
        raise CardContractError("fragment payload must be an object", path=str(path))
    return Fragment(
        stage=str(tree["stage"]),
        payload=payload,
        produced_at=produced.astimezone(timezone.utc),
    )


def load_template(path: str | Path) -> Template:
    path = Path(path)
    try:
        tree = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CardSyntaxError(
            f"template {path}: {exc.msg}", line=exc.lineno, column=exc.colno
        ) from exc
    if not isinstance(tree, dict):
        raise CardContractError("template file must hold an object", path=str(path))
    defaults = tree.get("defaults", {})
    if not isinstance(defaults, dict):
        raise CardContractError("template defaults must be an object", path=str(path))
    required = tuple(tree.get("required_from_pipeline", ()))
    overlapping = sorted(p for p in required if has_path(defaults, p))
    if overlapping:
        raise CardContractError(
            "template defaults may not supply required pipeline paths: "
            + ", ".join(overlapping),
            path=str(path),
        )
    return Template(defaults=defaults, required_from_pipeline=required)


def _merge_into(
    target: dict,
    incoming: dict,
    stage: str,
    origins: dict[str, str],
    prefix: str,
) -> None:
    for key, value in incoming.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in target:
            target[key] = copy.deepcopy(value)
            origins[path] = stage
            continue
        current = target[key]
        if current == value:
            continue
        if isinstance(current, dict) and isinstance(value, dict):
            _merge_into(current, value, stage, origins, path)
        elif isinstance(current, list) and isinstance(value, list):
            current.extend(copy.deepcopy(item) for item in value if item not in current)
        else:
            raise MergeConflictError(path, origins.get(path, "<unknown>"), stage)


def merge_fragments(fragments: Sequence[Fragment]) -> Fragment:
    """Deep union of fragment payloads, in order. Scalar conflicts are errors."""
    if not fragments:
        raise EmptyInputError("no fragments supplied")
    merged: dict = {}
    origins: dict[str, str] = {}
    stages: list[str] = []
    for fragment in fragments:
        if fragment.stage not in stages:
            stages.append(fragment.stage)
        _merge_into(merged, fragment.payload, fragment.stage, origins, "")
    return Fragment(
        stage="+".join(stages),
        payload=merged,
        produced_at=max(fragment.produced_at for fragment in fragments),
    )


def _overlay(defaults: Any, supplied: Any) -> Any:
    if isinstance(defaults, dict) and isinstance(supplied, dict):
        out = {key: copy.deepcopy(value) for key, value in defaults.items()}
        for key, value in supplied.items():
            out[key] = _overlay(out.get(key), value) if key in out else copy.deepcopy(value)
        return out
    # Pipeline-supplied values always win over defaults.
    return copy.deepcopy(supplied)


def apply_template(merged: Fragment, template: Template) -> SystemCard:
    """Overlay template defaults with the merged payload and parse the result."""
    missing = [
        path for path in template.required_from_pipeline if not has_path(merged.payload, path)
    ]
    if missing:
        raise MissingPipelineFieldError(missing)
    tree = _overlay(template.defaults, merged.payload)
    return card_from_tree(tree, check_invariants=True)


def assemble(
    fragment_paths: Iterable[str | Path],
    template_path: str | Path,
    out_format: str = "json",
) -> bytes:
    """Load fragments in argument order, merge, apply the template, serialize."""
    paths = list(fragment_paths)
    if not paths:
        raise EmptyInputError("no fragment paths supplied")
    fragments = [load_fragment(path) for path in paths]
    template = load_template(template_path)
    card = apply_template(merge_fragments(fragments), template)
    return serialize(card, out_format)
