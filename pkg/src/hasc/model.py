"""Card document model: typed structure, parsing, serialization, canonical form.

A card is parsed from JSON or YAML into immutable dataclasses. Parsing is
strict about structure (unknown nested keys rejected, enums checked) while
unknown *top-level* keys are preserved in ``extras`` so vendor extensions
round-trip. ``canonicalize`` produces the unique byte form used as the
signing and digest substrate: sorted keys, no insignificant whitespace,
UTF-8, and no floating-point values anywhere.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Any, Mapping, NoReturn

import yaml

from .errors import (
    CardContractError,
    CardInvariantError,
    CardSyntaxError,
    NoncanonicalizableError,
    RedactionError,
)
from .fieldpath import parse_path, path_sort_key, remove_path
from .identifiers import HazardId, format_hazard_id, parse_hazard_id

COMPONENT_KINDS = frozenset({"model", "guardrail-model", "datastore", "connector", "gateway", "other"})
HAZARD_CATEGORIES = frozenset({"security", "safety"})
HAZARD_STATUSES = frozenset({"open", "mitigated", "remediated", "accepted"})
HEX_STATUSES = frozenset({"not_affected", "affected", "fixed", "under_investigation"})
CHANGE_TYPES = frozenset({"major", "minor"})
VISIBILITIES = frozenset({"internal", "public"})

REDACTION_NOTICE_KEY = "redaction_notice"
NONE_IDENTIFIED_KEY = "none_identified"

_PROBABILITY_RE = re.compile(r"^(0(\.[0-9]{1,4})?|1(\.0{1,4})?)$")
_VERSION_RE = re.compile(r"^v(\d+)\.(\d+)(?:\.(\d+))?$")
_HEX_DIGEST_RE = re.compile(r"^[0-9a-f]+$")
_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


def looks_like_url(text: str) -> bool:
    from urllib.parse import urlparse

    try:
        parsed = urlparse(text)
    except ValueError:
        return False
    return parsed.scheme in {"http", "https"} and bool(parsed.netloc)


def looks_like_contact(text: str) -> bool:
    return bool(_EMAIL_RE.match(text)) or looks_like_url(text)


# ---------------------------------------------------------------------------
# Version

@dataclass(frozen=True, order=True)
class CardVersion:
    major: int
    minor: int
    patch: int = 0

    @classmethod
    def parse(cls, text: str) -> CardVersion:
        match = _VERSION_RE.match(text)
        if match is None:
            raise ValueError(f"invalid card version {text!r}: expected vMAJOR.MINOR[.PATCH]")
        major, minor, patch = match.groups()
        return cls(int(major), int(minor), int(patch or 0))

    def render(self) -> str:
        if self.patch:
            return f"v{self.major}.{self.minor}.{self.patch}"
        return f"v{self.major}.{self.minor}"

    def __str__(self) -> str:
        return self.render()


# ---------------------------------------------------------------------------
# Nested card types

@dataclass(frozen=True)
class ModelRef:
    name: str
    version: str
    sbom_link: str = ""
    provenance_link: str = ""


@dataclass(frozen=True)
class Component:
    name: str
    kind: str
    version: str


@dataclass(frozen=True)
class DataFlow:
    from_component: str
    to_component: str
    description: str


@dataclass(frozen=True)
class SystemBlueprint:
    architecture_summary: str
    components: tuple[Component, ...] = ()
    data_flows: tuple[DataFlow, ...] = ()
    models: tuple[ModelRef, ...] = ()
    system_prompt_doc: str = ""


@dataclass(frozen=True)
class IntentScope:
    intended_users: tuple[str, ...] = ()
    intended_uses: tuple[str, ...] = ()
    prohibited_uses: tuple[str, ...] = ()
    operational_boundaries: str = ""


@dataclass(frozen=True)
class ProvenanceRecord:
    source: str
    acquired: datetime
    actor: str
    transformation: str
    content_digest: str
    prior_digest: str | None = None


@dataclass(frozen=True)
class EvaluationResult:
    name: str
    metric: str
    value: str
    conditions: str | None = None


@dataclass(frozen=True)
class Limitation:
    description: str
    category: str


@dataclass(frozen=True)
class HexStatement:
    hazard: HazardId
    product: str
    status: str
    statement: str
    issued: datetime


@dataclass(frozen=True)
class HazardEntry:
    id: HazardId
    title: str
    category: str
    description: str
    status: str
    discovered: date
    probability_score: str | None = None
    probability_context: str | None = None
    mitigations: tuple[str, ...] = ()
    incident_link: str | None = None
    hex: HexStatement | None = None


@dataclass(frozen=True)
class Guardrail:
    name: str
    version: str
    mechanism: str
    covers: tuple[HazardId, ...] = ()


@dataclass(frozen=True)
class RemediationEntry:
    id: HazardId
    fixed_in: CardVersion
    summary: str


@dataclass(frozen=True)
class VersionHistoryEntry:
    version: CardVersion
    published: date
    change_type: str
    change_label: str
    summary: str
    associated_hazards: tuple[HazardId, ...] = ()
    affected_components: tuple[str, ...] = ()
    incident_link: str | None = None


@dataclass(frozen=True)
class GovernanceContacts:
    owner: str
    security_contact: str | None = None
    safety_contact: str | None = None


@dataclass(frozen=True)
class OssComponent:
    name: str
    version: str


@dataclass(frozen=True)
class OptionalComponents:
    inference_engine: str | None = None
    agentic_architecture: str | None = None
    hosting_platform: str | None = None
    oss_components: tuple[OssComponent, ...] = ()


@dataclass(frozen=True)
class Reference:
    label: str
    url: str


@dataclass(frozen=True)
class SystemCard:
    card_id: str
    version: CardVersion
    published: date
    blueprint: SystemBlueprint
    intent: IntentScope
    governance: GovernanceContacts
    provenance: tuple[ProvenanceRecord, ...] = ()
    evaluations: tuple[EvaluationResult, ...] = ()
    limitations: tuple[Limitation, ...] = ()
    hazard_log: tuple[HazardEntry, ...] = ()
    guardrails: tuple[Guardrail, ...] = ()
    remediations: tuple[RemediationEntry, ...] = ()
    history: tuple[VersionHistoryEntry, ...] = ()
    optional_components: OptionalComponents = OptionalComponents()
    references: tuple[Reference, ...] = ()
    visibility_marks: Mapping[str, str] = field(default_factory=dict)
    extras: Mapping[str, Any] = field(default_factory=dict)

    def hazard_ids(self) -> set[HazardId]:
        return {entry.id for entry in self.hazard_log}

    def none_identified(self) -> bool:
        return self.extras.get(NONE_IDENTIFIED_KEY) is True


# ---------------------------------------------------------------------------
# Tree coercion helpers

def _fail(path: str, message: str) -> NoReturn:
    raise CardContractError(message, path=path)


def _obj(value: Any, path: str, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected object, got {type(value).__name__}")
    allowed = set(required) | set(optional)
    unknown = sorted(key for key in value if key not in allowed)
    if unknown:
        _fail(path, f"unknown fields: {', '.join(unknown)}")
    missing = sorted(key for key in required if key not in value)
    if missing:
        _fail(path, f"missing required fields: {', '.join(missing)}")
    return value


def _str(value: Any, path: str, allow_empty: bool = False) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected string, got {type(value).__name__}")
    if not allow_empty and not value.strip():
        _fail(path, "must not be empty")
    return value


def _opt_str(value: Any, path: str) -> str | None:
    if value is None:
        return None
    return _str(value, path)


def _bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        _fail(path, f"expected boolean, got {type(value).__name__}")
    return value


def _list(value: Any, path: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        _fail(path, f"expected array, got {type(value).__name__}")
    return value


def _str_tuple(value: Any, path: str) -> tuple[str, ...]:
    return tuple(
        _str(item, f"{path}[{idx}]") for idx, item in enumerate(_list(value, path))
    )


def _enum(value: Any, path: str, allowed: frozenset[str]) -> str:
    text = _str(value, path)
    if text not in allowed:
        _fail(path, f"invalid value {text!r}; expected one of: {', '.join(sorted(allowed))}")
    return text


def _date(value: Any, path: str) -> date:
    if isinstance(value, datetime):
        _fail(path, "expected calendar date, got timestamp")
    if isinstance(value, date):
        return value
    if isinstance(value, str):
        try:
            return date.fromisoformat(value)
        except ValueError:
            _fail(path, f"invalid ISO-8601 date {value!r}")
    _fail(path, f"expected date, got {type(value).__name__}")


def _timestamp(value: Any, path: str) -> datetime:
    if isinstance(value, datetime):
        stamp = value
    elif isinstance(value, str):
        text = value[:-1] + "+00:00" if value.endswith("Z") else value
        try:
            stamp = datetime.fromisoformat(text)
        except ValueError:
            _fail(path, f"invalid ISO-8601 timestamp {value!r}")
    else:
        _fail(path, f"expected timestamp, got {type(value).__name__}")
    if stamp.tzinfo is None or stamp.utcoffset() is None:
        _fail(path, "timestamp must carry a UTC offset")
    return stamp.astimezone(timezone.utc)


def _hazard_id(value: Any, path: str) -> HazardId:
    text = _str(value, path)
    try:
        return parse_hazard_id(text)
    except Exception as exc:
        _fail(path, str(exc))


def _card_version(value: Any, path: str) -> CardVersion:
    text = _str(value, path)
    try:
        return CardVersion.parse(text)
    except ValueError as exc:
        _fail(path, str(exc))


def _probability(value: Any, path: str) -> str:
    text = _str(value, path)
    if not _PROBABILITY_RE.match(text):
        _fail(
            path,
            f"probability score {text!r} must be a decimal string in [0,1] "
            "with at most 4 fractional digits",
        )
    return text


def _hex_digest(value: Any, path: str) -> str:
    text = _str(value, path)
    if not _HEX_DIGEST_RE.match(text):
        _fail(path, f"expected lowercase hex digest, got {text!r}")
    return text


def _json_value(value: Any, path: str) -> Any:
    """Normalize an extras value to JSON-representable data."""
    if value is None or isinstance(value, (str, bool, int, float)):
        return value
    if isinstance(value, datetime):
        if value.tzinfo is None:
            value = value.replace(tzinfo=timezone.utc)
        return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, list):
        return [_json_value(item, f"{path}[{idx}]") for idx, item in enumerate(value)]
    if isinstance(value, dict):
        out = {}
        for key, item in value.items():
            if not isinstance(key, str):
                _fail(path, f"object keys must be strings, got {type(key).__name__}")
            out[key] = _json_value(item, f"{path}.{key}")
        return out
    _fail(path, f"value of type {type(value).__name__} is not representable")


# ---------------------------------------------------------------------------
# Tree -> card

def _parse_model_ref(tree: Any, path: str) -> ModelRef:
    obj = _obj(tree, path, ("name", "version"), ("sbom_link", "provenance_link"))
    return ModelRef(
        name=_str(obj["name"], f"{path}.name"),
        version=_str(obj["version"], f"{path}.version"),
        sbom_link=_str(obj.get("sbom_link", ""), f"{path}.sbom_link", allow_empty=True),
        provenance_link=_str(
            obj.get("provenance_link", ""), f"{path}.provenance_link", allow_empty=True
        ),
    )


def _parse_component(tree: Any, path: str) -> Component:
    obj = _obj(tree, path, ("name", "kind", "version"))
    return Component(
        name=_str(obj["name"], f"{path}.name"),
        kind=_enum(obj["kind"], f"{path}.kind", COMPONENT_KINDS),
        version=_str(obj["version"], f"{path}.version"),
    )


def _parse_data_flow(tree: Any, path: str) -> DataFlow:
    obj = _obj(tree, path, ("from", "to", "description"))
    return DataFlow(
        from_component=_str(obj["from"], f"{path}.from"),
        to_component=_str(obj["to"], f"{path}.to"),
        description=_str(obj["description"], f"{path}.description", allow_empty=True),
    )


def _parse_blueprint(tree: Any, path: str) -> SystemBlueprint:
    obj = _obj(
        tree,
        path,
        ("architecture_summary",),
        ("components", "data_flows", "models", "system_prompt_doc"),
    )
    return SystemBlueprint(
        architecture_summary=_str(
            obj["architecture_summary"], f"{path}.architecture_summary", allow_empty=True
        ),
        components=tuple(
            _parse_component(item, f"{path}.components[{idx}]")
            for idx, item in enumerate(_list(obj.get("components"), f"{path}.components"))
        ),
        data_flows=tuple(
            _parse_data_flow(item, f"{path}.data_flows[{idx}]")
            for idx, item in enumerate(_list(obj.get("data_flows"), f"{path}.data_flows"))
        ),
        models=tuple(
            _parse_model_ref(item, f"{path}.models[{idx}]")
            for idx, item in enumerate(_list(obj.get("models"), f"{path}.models"))
        ),
        system_prompt_doc=_str(
            obj.get("system_prompt_doc", ""), f"{path}.system_prompt_doc", allow_empty=True
        ),
    )


def _parse_intent(tree: Any, path: str) -> IntentScope:
    obj = _obj(
        tree,
        path,
        (),
        ("intended_users", "intended_uses", "prohibited_uses", "operational_boundaries"),
    )
    return IntentScope(
        intended_users=_str_tuple(obj.get("intended_users"), f"{path}.intended_users"),
        intended_uses=_str_tuple(obj.get("intended_uses"), f"{path}.intended_uses"),
        prohibited_uses=_str_tuple(obj.get("prohibited_uses"), f"{path}.prohibited_uses"),
        operational_boundaries=_str(
            obj.get("operational_boundaries", ""),
            f"{path}.operational_boundaries",
            allow_empty=True,
        ),
    )


def _parse_provenance(tree: Any, path: str) -> ProvenanceRecord:
    obj = _obj(
        tree,
        path,
        ("source", "acquired", "actor", "transformation", "content_digest"),
        ("prior_digest",),
    )
    prior = obj.get("prior_digest")
    return ProvenanceRecord(
        source=_str(obj["source"], f"{path}.source"),
        acquired=_timestamp(obj["acquired"], f"{path}.acquired"),
        actor=_str(obj["actor"], f"{path}.actor"),
        transformation=_str(obj["transformation"], f"{path}.transformation", allow_empty=True),
        content_digest=_hex_digest(obj["content_digest"], f"{path}.content_digest"),
        prior_digest=None if prior is None else _hex_digest(prior, f"{path}.prior_digest"),
    )


def _parse_evaluation(tree: Any, path: str) -> EvaluationResult:
    obj = _obj(tree, path, ("name", "metric", "value"), ("conditions",))
    return EvaluationResult(
        name=_str(obj["name"], f"{path}.name"),
        metric=_str(obj["metric"], f"{path}.metric"),
        value=_str(obj["value"], f"{path}.value"),
        conditions=_opt_str(obj.get("conditions"), f"{path}.conditions"),
    )


def _parse_limitation(tree: Any, path: str) -> Limitation:
    obj = _obj(tree, path, ("description", "category"))
    return Limitation(
        description=_str(obj["description"], f"{path}.description"),
        category=_str(obj["category"], f"{path}.category"),
    )


def _parse_hex_statement(tree: Any, path: str) -> HexStatement:
    obj = _obj(tree, path, ("hazard", "product", "status", "statement", "issued"))
    return HexStatement(
        hazard=_hazard_id(obj["hazard"], f"{path}.hazard"),
        product=_str(obj["product"], f"{path}.product"),
        status=_enum(obj["status"], f"{path}.status", HEX_STATUSES),
        statement=_str(obj["statement"], f"{path}.statement", allow_empty=True),
        issued=_timestamp(obj["issued"], f"{path}.issued"),
    )


def _parse_hazard(tree: Any, path: str) -> HazardEntry:
    obj = _obj(
        tree,
        path,
        ("id", "title", "category", "description", "status", "discovered"),
        ("probability_score", "probability_context", "mitigations", "incident_link", "hex"),
    )
    score = obj.get("probability_score")
    return HazardEntry(
        id=_hazard_id(obj["id"], f"{path}.id"),
        title=_str(obj["title"], f"{path}.title"),
        category=_enum(obj["category"], f"{path}.category", HAZARD_CATEGORIES),
        description=_str(obj["description"], f"{path}.description", allow_empty=True),
        status=_enum(obj["status"], f"{path}.status", HAZARD_STATUSES),
        discovered=_date(obj["discovered"], f"{path}.discovered"),
        probability_score=None if score is None else _probability(score, f"{path}.probability_score"),
        probability_context=_opt_str(
            obj.get("probability_context"), f"{path}.probability_context"
        ),
        mitigations=_str_tuple(obj.get("mitigations"), f"{path}.mitigations"),
        incident_link=_opt_str(obj.get("incident_link"), f"{path}.incident_link"),
        hex=None
        if obj.get("hex") is None
        else _parse_hex_statement(obj["hex"], f"{path}.hex"),
    )


def _parse_guardrail(tree: Any, path: str) -> Guardrail:
    obj = _obj(tree, path, ("name", "version", "mechanism"), ("covers",))
    return Guardrail(
        name=_str(obj["name"], f"{path}.name"),
        version=_str(obj["version"], f"{path}.version"),
        mechanism=_str(obj["mechanism"], f"{path}.mechanism", allow_empty=True),
        covers=tuple(
            _hazard_id(item, f"{path}.covers[{idx}]")
            for idx, item in enumerate(_list(obj.get("covers"), f"{path}.covers"))
        ),
    )


def _parse_remediation(tree: Any, path: str) -> RemediationEntry:
    obj = _obj(tree, path, ("id", "fixed_in", "summary"))
    return RemediationEntry(
        id=_hazard_id(obj["id"], f"{path}.id"),
        fixed_in=_card_version(obj["fixed_in"], f"{path}.fixed_in"),
        summary=_str(obj["summary"], f"{path}.summary", allow_empty=True),
    )


def _parse_history_entry(tree: Any, path: str) -> VersionHistoryEntry:
    obj = _obj(
        tree,
        path,
        ("version", "published", "change_type", "change_label", "summary"),
        ("associated_hazards", "affected_components", "incident_link"),
    )
    return VersionHistoryEntry(
        version=_card_version(obj["version"], f"{path}.version"),
        published=_date(obj["published"], f"{path}.published"),
        change_type=_enum(obj["change_type"], f"{path}.change_type", CHANGE_TYPES),
        change_label=_str(obj["change_label"], f"{path}.change_label"),
        summary=_str(obj["summary"], f"{path}.summary", allow_empty=True),
        associated_hazards=tuple(
            _hazard_id(item, f"{path}.associated_hazards[{idx}]")
            for idx, item in enumerate(
                _list(obj.get("associated_hazards"), f"{path}.associated_hazards")
            )
        ),
        affected_components=_str_tuple(
            obj.get("affected_components"), f"{path}.affected_components"
        ),
        incident_link=_opt_str(obj.get("incident_link"), f"{path}.incident_link"),
    )


def _parse_governance(tree: Any, path: str) -> GovernanceContacts:
    obj = _obj(tree, path, ("owner",), ("security_contact", "safety_contact"))
    return GovernanceContacts(
        owner=_str(obj["owner"], f"{path}.owner"),
        security_contact=_opt_str(obj.get("security_contact"), f"{path}.security_contact"),
        safety_contact=_opt_str(obj.get("safety_contact"), f"{path}.safety_contact"),
    )


def _parse_optional_components(tree: Any, path: str) -> OptionalComponents:
    obj = _obj(
        tree,
        path,
        (),
        ("inference_engine", "agentic_architecture", "hosting_platform", "oss_components"),
    )
    oss = []
    for idx, item in enumerate(_list(obj.get("oss_components"), f"{path}.oss_components")):
        entry = _obj(item, f"{path}.oss_components[{idx}]", ("name", "version"))
        oss.append(
            OssComponent(
                name=_str(entry["name"], f"{path}.oss_components[{idx}].name", allow_empty=True),
                version=_str(
                    entry["version"], f"{path}.oss_components[{idx}].version", allow_empty=True
                ),
            )
        )
    return OptionalComponents(
        inference_engine=_opt_str(obj.get("inference_engine"), f"{path}.inference_engine"),
        agentic_architecture=_opt_str(
            obj.get("agentic_architecture"), f"{path}.agentic_architecture"
        ),
        hosting_platform=_opt_str(obj.get("hosting_platform"), f"{path}.hosting_platform"),
        oss_components=tuple(oss),
    )


def _parse_reference(tree: Any, path: str) -> Reference:
    obj = _obj(tree, path, ("label", "url"))
    return Reference(
        label=_str(obj["label"], f"{path}.label"),
        url=_str(obj["url"], f"{path}.url"),
    )


_KNOWN_TOP_LEVEL = (
    "card_id",
    "version",
    "published",
    "blueprint",
    "intent",
    "provenance",
    "evaluations",
    "limitations",
    "hazard_log",
    "guardrails",
    "remediations",
    "history",
    "governance",
    "optional_components",
    "references",
    "visibility_marks",
)

_REQUIRED_TOP_LEVEL = ("card_id", "version", "published", "blueprint", "intent", "governance")


def card_from_tree(tree: Any, check_invariants: bool = True) -> SystemCard:
    """Build a SystemCard from a plain document tree."""
    if not isinstance(tree, dict):
        _fail("$", f"card document must be an object, got {type(tree).__name__}")
    missing = sorted(key for key in _REQUIRED_TOP_LEVEL if key not in tree)
    if missing:
        _fail("$", f"missing required fields: {', '.join(missing)}")

    marks_raw = tree.get("visibility_marks") or {}
    if not isinstance(marks_raw, dict):
        _fail("visibility_marks", "expected object")
    marks: dict[str, str] = {}
    for mark_path, visibility in marks_raw.items():
        try:
            parse_path(mark_path)
        except ValueError as exc:
            _fail("visibility_marks", str(exc))
        marks[mark_path] = _enum(visibility, f"visibility_marks.{mark_path}", VISIBILITIES)

    extras = {
        key: _json_value(value, key)
        for key, value in tree.items()
        if key not in _KNOWN_TOP_LEVEL
    }

    card = SystemCard(
        card_id=_str(tree["card_id"], "card_id"),
        version=_card_version(tree["version"], "version"),
        published=_date(tree["published"], "published"),
        blueprint=_parse_blueprint(tree["blueprint"], "blueprint"),
        intent=_parse_intent(tree["intent"], "intent"),
        governance=_parse_governance(tree["governance"], "governance"),
        provenance=tuple(
            _parse_provenance(item, f"provenance[{idx}]")
            for idx, item in enumerate(_list(tree.get("provenance"), "provenance"))
        ),
        evaluations=tuple(
            _parse_evaluation(item, f"evaluations[{idx}]")
            for idx, item in enumerate(_list(tree.get("evaluations"), "evaluations"))
        ),
        limitations=tuple(
            _parse_limitation(item, f"limitations[{idx}]")
            for idx, item in enumerate(_list(tree.get("limitations"), "limitations"))
        ),
        hazard_log=tuple(
            _parse_hazard(item, f"hazard_log[{idx}]")
            for idx, item in enumerate(_list(tree.get("hazard_log"), "hazard_log"))
        ),
        guardrails=tuple(
            _parse_guardrail(item, f"guardrails[{idx}]")
            for idx, item in enumerate(_list(tree.get("guardrails"), "guardrails"))
        ),
        remediations=tuple(
            _parse_remediation(item, f"remediations[{idx}]")
            for idx, item in enumerate(_list(tree.get("remediations"), "remediations"))
        ),
        history=tuple(
            _parse_history_entry(item, f"history[{idx}]")
            for idx, item in enumerate(_list(tree.get("history"), "history"))
        ),
        optional_components=_parse_optional_components(
            tree.get("optional_components") or {}, "optional_components"
        ),
        references=tuple(
            _parse_reference(item, f"references[{idx}]")
            for idx, item in enumerate(_list(tree.get("references"), "references"))
        ),
        visibility_marks=marks,
        extras=extras,
    )

    if check_invariants:
        violations = check_card_invariants(card)
        if violations:
            raise CardInvariantError(
                "card violates invariants: " + "; ".join(str(v) for v in violations),
                violations=[str(v) for v in violations],
            )
    return card


# ---------------------------------------------------------------------------
# Invariants

@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def check_card_invariants(card: SystemCard) -> list[Violation]:
    """Return every violated card invariant as (code, path, message)."""
    problems: list[Violation] = []

    def bad(code: str, path: str, message: str) -> None:
        problems.append(Violation(code=code, path=path, message=message))

    hazard_id_set = {entry.id for entry in card.hazard_log}

    seen: set[HazardId] = set()
    for idx, entry in enumerate(card.hazard_log):
        if entry.id in seen:
            bad("DUPLICATE_HAZARD_ID", f"hazard_log[{idx}].id", f"duplicate hazard id {entry.id}")
        seen.add(entry.id)

        if entry.category == "security" and entry.id.scheme != "CVE":
            bad(
                "ID_SCHEME_MISMATCH",
                f"hazard_log[{idx}].id",
                f"security hazards must use CVE ids, got {entry.id}",
            )
        if entry.category == "safety" and entry.id.scheme != "ASH":
            bad(
                "ID_SCHEME_MISMATCH",
                f"hazard_log[{idx}].id",
                f"safety hazards must use ASH ids, got {entry.id}",
            )
        if (
            entry.status in {"mitigated", "remediated"}
            and not entry.mitigations
            and not entry.incident_link
        ):
            bad(
                "STATUS_NEEDS_MITIGATION",
                f"hazard_log[{idx}].status",
                f"status {entry.status!r} requires mitigations or an incident link",
            )
        if entry.probability_score is not None and not entry.probability_context:
            bad(
                "SCORE_CONTEXT_MISSING",
                f"hazard_log[{idx}].probability_context",
                "probability_context required when a score is present",
            )
        if entry.hex is not None:
            if entry.hex.hazard != entry.id:
                bad(
                    "HEX_INCONSISTENT",
                    f"hazard_log[{idx}].hex.hazard",
                    f"statement names {entry.hex.hazard}, entry is {entry.id}",
                )
            if entry.hex.product != card.card_id:
                bad(
                    "HEX_INCONSISTENT",
                    f"hazard_log[{idx}].hex.product",
                    f"product {entry.hex.product!r} is not this card ({card.card_id!r})",
                )
            if entry.hex.status == "fixed" and not any(
                rem.id == entry.id for rem in card.remediations
            ):
                bad(
                    "HEX_INCONSISTENT",
                    f"hazard_log[{idx}].hex.status",
                    "status 'fixed' without a remediation entry for the hazard",
                )

    guardrail_names = [rail.name for rail in card.guardrails]
    for idx, rail in enumerate(card.guardrails):
        if guardrail_names.count(rail.name) > 1 and guardrail_names.index(rail.name) != idx:
            bad(
                "DUPLICATE_NAME",
                f"guardrails[{idx}].name",
                f"duplicate guardrail name {rail.name!r}",
            )
        try:
            CardVersion.parse(rail.version if rail.version.startswith("v") else "v" + rail.version)
        except ValueError:
            bad(
                "GUARDRAIL_VERSION_UNPARSEABLE",
                f"guardrails[{idx}].version",
                f"version {rail.version!r} is not version-comparable",
            )
        for cover_idx, covered in enumerate(rail.covers):
            if covered not in hazard_id_set:
                bad(
                    "DANGLING_HAZARD_REF",
                    f"guardrails[{idx}].covers[{cover_idx}]",
                    f"guardrail {rail.name!r} covers unknown hazard {covered}",
                )

    for idx, rem in enumerate(card.remediations):
        if rem.id not in hazard_id_set:
            bad(
                "REMEDIATION_UNKNOWN_HAZARD",
                f"remediations[{idx}].id",
                f"remediation names hazard {rem.id} that the card does not list",
            )
        if rem.fixed_in > card.version:
            bad(
                "REMEDIATION_VERSION_AHEAD",
                f"remediations[{idx}].fixed_in",
                f"fixed_in {rem.fixed_in} is newer than the card version {card.version}",
            )

    if card.history:
        versions = [entry.version for entry in card.history]
        for idx in range(1, len(versions)):
            if versions[idx] <= versions[idx - 1]:
                bad(
                    "HISTORY_ORDER",
                    f"history[{idx}].version",
                    f"{versions[idx]} does not increase over {versions[idx - 1]}",
                )
        if card.history[-1].version != card.version:
            bad(
                "HISTORY_ORDER",
                "history",
                f"head entry {card.history[-1].version} does not match card "
                f"version {card.version}",
            )
        if card.published < card.history[-1].published:
            bad(
                "PUBLISHED_BEFORE_HISTORY",
                "published",
                f"{card.published.isoformat()} is before the newest history entry "
                f"({card.history[-1].published.isoformat()})",
            )
        if card.history[0].change_type != "major":
            bad(
                "FIRST_ENTRY_NOT_MAJOR",
                "history[0].change_type",
                "first history entry must be a major change",
            )
    for idx, entry in enumerate(card.history):
        for hz_idx, hazard in enumerate(entry.associated_hazards):
            if hazard not in hazard_id_set:
                bad(
                    "DANGLING_HAZARD_REF",
                    f"history[{idx}].associated_hazards[{hz_idx}]",
                    f"history entry {entry.version} names unknown hazard {hazard}",
                )

    component_names = [component.name for component in card.blueprint.components]
    component_name_set = set(component_names)
    for idx, component in enumerate(card.blueprint.components):
        if component_names.count(component.name) > 1 and component_names.index(component.name) != idx:
            bad(
                "DUPLICATE_NAME",
                f"blueprint.components[{idx}].name",
                f"duplicate component name {component.name!r}",
            )
    for idx, flow in enumerate(card.blueprint.data_flows):
        if flow.from_component not in component_name_set:
            bad(
                "FLOW_UNKNOWN_COMPONENT",
                f"blueprint.data_flows[{idx}].from",
                f"unknown component {flow.from_component!r}",
            )
        if flow.to_component not in component_name_set:
            bad(
                "FLOW_UNKNOWN_COMPONENT",
                f"blueprint.data_flows[{idx}].to",
                f"unknown component {flow.to_component!r}",
            )
    model_names = [model.name for model in card.blueprint.models]
    for idx, model in enumerate(card.blueprint.models):
        if model_names.count(model.name) > 1 and model_names.index(model.name) != idx:
            bad(
                "DUPLICATE_NAME",
                f"blueprint.models[{idx}].name",
                f"duplicate model name {model.name!r}",
            )
        matching = [
            component
            for component in card.blueprint.components
            if component.name == model.name and component.kind == "model"
        ]
        if len(matching) != 1:
            bad(
                "MODEL_NOT_IN_COMPONENTS",
                f"blueprint.models[{idx}].name",
                f"{model.name!r} must appear exactly once in components with kind 'model'",
            )

    normalized_uses = {use.strip().casefold() for use in card.intent.intended_uses}
    normalized_prohibited = {use.strip().casefold() for use in card.intent.prohibited_uses}
    overlap = sorted(normalized_uses & normalized_prohibited)
    if overlap:
        bad(
            "INTENT_OVERLAP",
            "intent.prohibited_uses",
            f"uses both intended and prohibited: {', '.join(overlap)}",
        )

    earlier_digests: set[str] = set()
    for idx, record in enumerate(card.provenance):
        if record.prior_digest is not None and record.prior_digest not in earlier_digests:
            bad(
                "PROVENANCE_CHAIN_BROKEN",
                f"provenance[{idx}].prior_digest",
                "prior_digest does not match any earlier record",
            )
        earlier_digests.add(record.content_digest)

    for contact_name in ("security_contact", "safety_contact"):
        contact = getattr(card.governance, contact_name)
        if contact is not None and not looks_like_contact(contact):
            bad(
                "CONTACT_SYNTAX",
                f"governance.{contact_name}",
                f"{contact!r} is neither an email nor a URL",
            )

    return problems


# ---------------------------------------------------------------------------
# Card -> tree

def _hex_statement_to_tree(statement: HexStatement) -> dict:
    return {
        "hazard": format_hazard_id(statement.hazard),
        "product": statement.product,
        "status": statement.status,
        "statement": statement.statement,
        "issued": statement.issued.isoformat().replace("+00:00", "Z"),
    }


def card_to_tree(card: SystemCard) -> dict:
    """Serialize a card to a plain tree of JSON-compatible values."""
    tree: dict[str, Any] = {
        "card_id": card.card_id,
        "version": card.version.render(),
        "published": card.published.isoformat(),
        "blueprint": {
            "architecture_summary": card.blueprint.architecture_summary,
            "components": [
                {"name": c.name, "kind": c.kind, "version": c.version}
                for c in card.blueprint.components
            ],
            "data_flows": [
                {"from": f.from_component, "to": f.to_component, "description": f.description}
                for f in card.blueprint.data_flows
            ],
            "models": [
                {
                    "name": m.name,
                    "version": m.version,
                    "sbom_link": m.sbom_link,
                    "provenance_link": m.provenance_link,
                }
                for m in card.blueprint.models
            ],
            "system_prompt_doc": card.blueprint.system_prompt_doc,
        },
        "intent": {
            "intended_users": list(card.intent.intended_users),
            "intended_uses": list(card.intent.intended_uses),
            "prohibited_uses": list(card.intent.prohibited_uses),
            "operational_boundaries": card.intent.operational_boundaries,
        },
        "provenance": [
            {
                "source": r.source,
                "acquired": r.acquired.isoformat().replace("+00:00", "Z"),
                "actor": r.actor,
                "transformation": r.transformation,
                "content_digest": r.content_digest,
                **({"prior_digest": r.prior_digest} if r.prior_digest is not None else {}),
            }
            for r in card.provenance
        ],
        "evaluations": [
            {
                "name": e.name,
                "metric": e.metric,
                "value": e.value,
                **({"conditions": e.conditions} if e.conditions is not None else {}),
            }
            for e in card.evaluations
        ],
        "limitations": [
            {"description": l.description, "category": l.category} for l in card.limitations
        ],
        "hazard_log": [_hazard_to_tree(entry) for entry in card.hazard_log],
        "guardrails": [
            {
                "name": g.name,
                "version": g.version,
                "mechanism": g.mechanism,
                "covers": [format_hazard_id(h) for h in g.covers],
            }
            for g in card.guardrails
        ],
        "remediations": [
            {
                "id": format_hazard_id(r.id),
                "fixed_in": r.fixed_in.render(),
                "summary": r.summary,
            }
            for r in card.remediations
        ],
        "history": [_history_entry_to_tree(entry) for entry in card.history],
        "governance": {
            "owner": card.governance.owner,
            **(
                {"security_contact": card.governance.security_contact}
                if card.governance.security_contact is not None
                else {}
            ),
            **(
                {"safety_contact": card.governance.safety_contact}
                if card.governance.safety_contact is not None
                else {}
            ),
        },
        "references": [{"label": r.label, "url": r.url} for r in card.references],
    }

    optional: dict[str, Any] = {}
    if card.optional_components.inference_engine is not None:
        optional["inference_engine"] = card.optional_components.inference_engine
    if card.optional_components.agentic_architecture is not None:
        optional["agentic_architecture"] = card.optional_components.agentic_architecture
    if card.optional_components.hosting_platform is not None:
        optional["hosting_platform"] = card.optional_components.hosting_platform
    if card.optional_components.oss_components:
        optional["oss_components"] = [
            {"name": c.name, "version": c.version}
            for c in card.optional_components.oss_components
        ]
    if optional:
        tree["optional_components"] = optional
    if card.visibility_marks:
        tree["visibility_marks"] = dict(card.visibility_marks)
    for key in sorted(card.extras):
        tree[key] = copy.deepcopy(card.extras[key])
    return tree


def _hazard_to_tree(entry: HazardEntry) -> dict:
    out: dict[str, Any] = {
        "id": format_hazard_id(entry.id),
        "title": entry.title,
        "category": entry.category,
        "description": entry.description,
        "status": entry.status,
        "discovered": entry.discovered.isoformat(),
    }
    if entry.probability_score is not None:
        out["probability_score"] = entry.probability_score
    if entry.probability_context is not None:
        out["probability_context"] = entry.probability_context
    if entry.mitigations:
        out["mitigations"] = list(entry.mitigations)
    if entry.incident_link is not None:
        out["incident_link"] = entry.incident_link
    if entry.hex is not None:
        out["hex"] = _hex_statement_to_tree(entry.hex)
    return out


def _history_entry_to_tree(entry: VersionHistoryEntry) -> dict:
    out: dict[str, Any] = {
        "version": entry.version.render(),
        "published": entry.published.isoformat(),
        "change_type": entry.change_type,
        "change_label": entry.change_label,
        "summary": entry.summary,
    }
    if entry.associated_hazards:
        out["associated_hazards"] = [format_hazard_id(h) for h in entry.associated_hazards]
    if entry.affected_components:
        out["affected_components"] = list(entry.affected_components)
    if entry.incident_link is not None:
        out["incident_link"] = entry.incident_link
    return out


# ---------------------------------------------------------------------------
# Parse / serialize / canonicalize

def parse_card(data: bytes | str, format: str = "json", check_invariants: bool = True) -> SystemCard:
    """Parse card bytes in the named format ('json' or 'yaml')."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CardSyntaxError(f"input is not valid UTF-8: {exc}") from exc
    else:
        text = data

    if format == "json":
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CardSyntaxError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    elif format == "yaml":
        try:
            tree = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise CardSyntaxError(
                str(getattr(exc, "problem", None) or exc),
                line=None if mark is None else mark.line + 1,
                column=None if mark is None else mark.column + 1,
            ) from exc
    else:
        raise ValueError(f"unknown card format {format!r}")
    return card_from_tree(tree, check_invariants=check_invariants)


def serialize(card: SystemCard, format: str = "json") -> bytes:
    """Serialize a card; parse_card(serialize(c, f), f) == c."""
    tree = card_to_tree(card)
    if format == "json":
        return (json.dumps(tree, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if format == "yaml":
        return yaml.safe_dump(tree, sort_keys=False, allow_unicode=True).encode("utf-8")
    raise ValueError(f"unknown card format {format!r}")


def _check_canonical_value(value: Any, path: str) -> None:
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, float):
        raise NoncanonicalizableError(
            "floating-point values cannot appear in canonical form "
            "(carry decimals as strings)",
            path=path,
        )
    if isinstance(value, (bytes, bytearray)):
        raise NoncanonicalizableError("binary values cannot appear in canonical form", path=path)
    if isinstance(value, list):
        for idx, item in enumerate(value):
            _check_canonical_value(item, f"{path}[{idx}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            _check_canonical_value(item, f"{path}.{key}")
        return
    raise NoncanonicalizableError(
        f"value of type {type(value).__name__} cannot appear in canonical form", path=path
    )


def canonicalize(card: SystemCard) -> bytes:
    """Canonical JSON bytes: code-point-sorted keys, minimal whitespace, UTF-8."""
    tree = card_to_tree(card)
    _check_canonical_value(tree, "$")
    return json.dumps(tree, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


# ---------------------------------------------------------------------------
# Redaction

def redact_public(card: SystemCard) -> SystemCard:
    """Produce the public variant: internal-marked paths removed, notice appended."""
    internal_paths = sorted(
        (path for path, visibility in card.visibility_marks.items() if visibility == "internal"),
        key=path_sort_key,
        reverse=True,
    )
    tree = card_to_tree(card)
    removed = 0
    for path in internal_paths:
        if remove_path(tree, path):
            removed += 1

    surviving_marks = {
        path: visibility
        for path, visibility in card.visibility_marks.items()
        if visibility != "internal"
    }
    if surviving_marks:
        tree["visibility_marks"] = surviving_marks
    else:
        tree.pop("visibility_marks", None)
    tree[REDACTION_NOTICE_KEY] = {"removed_paths": removed}

    from .validation import validate_essential

    try:
        redacted = card_from_tree(tree, check_invariants=True)
    except (CardContractError, CardInvariantError) as exc:
        raise RedactionError(
            f"removing internal-marked paths breaks the card: {exc}"
        ) from exc

    before = {f.path for f in validate_essential(card).findings if f.severity == "error"}
    after = {f.path for f in validate_essential(redacted).findings if f.severity == "error"}
    introduced = sorted(after - before)
    if introduced:
        raise RedactionError(
            "redaction removes essential content at: " + ", ".join(introduced)
        )
    return redacted


# ---------------------------------------------------------------------------
# HeX export

_HEX_STATUS_BY_HAZARD_STATUS = {
    "remediated": "fixed",
    "mitigated": "affected",
    "open": "under_investigation",
    "accepted": "affected",
}


def export_hex(card: SystemCard) -> tuple[HexStatement, ...]:
    """One exchange statement per hazard; status derived from the hazard status."""
    issued = datetime.combine(card.published, datetime.min.time(), tzinfo=timezone.utc)
    statements = []
    for entry in card.hazard_log:
        status = _HEX_STATUS_BY_HAZARD_STATUS[entry.status]
        if entry.status == "remediated":
            fixed_in = next(
                (rem.fixed_in.render() for rem in card.remediations if rem.id == entry.id), None
            )
            statement = f"Fixed in {fixed_in}." if fixed_in else "Remediated."
        elif entry.status == "mitigated":
            names = ", ".join(entry.mitigations) if entry.mitigations else "deployed controls"
            statement = f"Mitigated by: {names}."
        elif entry.status == "accepted":
            statement = "Risk accepted without mitigation."
        else:
            statement = "Under investigation."
        statements.append(
            HexStatement(
                hazard=entry.id,
                product=card.card_id,
                status=status,
                statement=statement,
                issued=issued,
            )
        )
    return tuple(statements)


def hex_statements_to_json(statements: tuple[HexStatement, ...]) -> bytes:
    trees = [_hex_statement_to_tree(statement) for statement in statements]
    return (json.dumps(trees, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# File helpers

def format_for_path(path: str) -> str:
    lowered = str(path).lower()
    if lowered.endswith((".yaml", ".yml")):
        return "yaml"
    return "json"


def load_card_file(path: str, check_invariants: bool = True) -> SystemCard:
    with open(path, "rb") as handle:
        data = handle.read()
    return parse_card(data, format_for_path(path), check_invariants=check_invariants)
