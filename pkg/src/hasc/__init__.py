"""Toolchain for hazard-aware system cards.

Assembles cards from pipeline fragments, validates the essential-component
contract, computes structural diffs and changelog entries, renders
Markdown/HTML, signs canonical bytes, serves cards over HTTP, and evaluates
policy-as-code release gates.
"""

from .assembly import Fragment, Template, apply_template, assemble, merge_fragments
from .attest import Attestation, VerifyResult, digest, sign, verify
from .diffchange import CardDiff, classify_change, diff_cards, make_changelog_entry
from .distribution import (
    InventoryReport,
    ServeConfig,
    consume_and_gate,
    fetch,
    inventory,
    serve,
)
from .errors import HascError
from .identifiers import (
    HazardId,
    IdRegistry,
    allocate,
    format_hazard_id,
    load_registry,
    parse_hazard_id,
    store_registry,
)
from .model import (
    CardVersion,
    HazardEntry,
    HexStatement,
    SystemCard,
    canonicalize,
    export_hex,
    parse_card,
    redact_public,
    serialize,
)
from .policy import PolicySet, Verdict, builtin_policies, evaluate, parse_policy
from .render import RenderOptions, render_changelog, render_html, render_markdown
from .validation import ValidationReport, validate, validate_essential, validate_semantics

__version__ = "0.1.0"

__all__ = [
    "Attestation",
    "CardDiff",
    "CardVersion",
    "Fragment",
    "HascError",
    "HazardEntry",
    "HazardId",
    "HexStatement",
    "IdRegistry",
    "InventoryReport",
    "PolicySet",
    "RenderOptions",
    "ServeConfig",
    "SystemCard",
    "Template",
    "ValidationReport",
    "Verdict",
    "VerifyResult",
    "allocate",
    "apply_template",
    "assemble",
    "builtin_policies",
    "canonicalize",
    "classify_change",
    "consume_and_gate",
    "diff_cards",
    "digest",
    "evaluate",
    "export_hex",
    "fetch",
    "format_hazard_id",
    "inventory",
    "load_registry",
    "make_changelog_entry",
    "merge_fragments",
    "parse_card",
    "parse_hazard_id",
    "parse_policy",
    "redact_public",
    "render_changelog",
    "render_html",
    "render_markdown",
    "serialize",
    "serve",
    "sign",
    "store_registry",
    "validate",
    "validate_essential",
    "validate_semantics",
    "verify",
]
