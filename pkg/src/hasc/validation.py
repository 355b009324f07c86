"""Essential-component and cross-reference checks producing structured reports.

Problems are findings, not exceptions: ``fail`` means at least one
error-severity finding, ``warn`` means warnings only, ``pass`` means a clean
card. Checks are deterministic and fully offline (URL checks are syntactic).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    NONE_IDENTIFIED_KEY,
    SystemCard,
    check_card_invariants,
    looks_like_url,
)

# Required-field table for the essential-component contract. Redaction uses
# the findings diff, so removing any of these from a passing card is caught.
ESSENTIAL_FIELD_PATHS = (
    "blueprint.architecture_summary",
    "blueprint.models",
    "intent.intended_uses",
    "hazard_log",
    "remediations",
    "governance.security_contact",
)

REMEDIATION_LINK_LABEL = "remediation_link"

DANGLING_REF_CODES = frozenset({"DANGLING_HAZARD_REF", "REMEDIATION_UNKNOWN_HAZARD"})


@dataclass(frozen=True)
class Finding:
    code: str
    severity: str  # "error" | "warning"
    path: str
    message: str

    def to_tree(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity,
            "path": self.path,
            "message": self.message,
        }


@dataclass(frozen=True)
class ValidationReport:
    level: str  # "pass" | "warn" | "fail"
    findings: tuple[Finding, ...]

    def to_tree(self) -> dict:
        return {
            "level": self.level,
            "findings": [finding.to_tree() for finding in self.findings],
        }


def _report(findings: list[Finding]) -> ValidationReport:
    ordered = tuple(sorted(findings, key=lambda f: (f.path, f.code)))
    if any(f.severity == "error" for f in ordered):
        level = "fail"
    elif ordered:
        level = "warn"
    else:
        level = "pass"
    return ValidationReport(level=level, findings=ordered)


def _error(code: str, path: str, message: str) -> Finding:
    return Finding(code=code, severity="error", path=path, message=message)


def _warning(code: str, path: str, message: str) -> Finding:
    return Finding(code=code, severity="warning", path=path, message=message)


def validate_essential(card: SystemCard) -> ValidationReport:
    """Check the essential-component contract: blueprint, hazard analysis,
    remediation section, and a security contact."""
    findings: list[Finding] = []

    if not card.blueprint.architecture_summary.strip():
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "blueprint.architecture_summary",
                "blueprint must describe the system architecture",
            )
        )
    if not card.blueprint.models:
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "blueprint.models",
                "blueprint must list the core models in use",
            )
        )
    for idx, model in enumerate(card.blueprint.models):
        if not model.provenance_link:
            findings.append(
                _error(
                    "ESSENTIAL_MISSING",
                    f"blueprint.models[{idx}].provenance_link",
                    f"model {model.name!r} lacks a provenance link",
                )
            )
        if not model.sbom_link:
            findings.append(
                _error(
                    "ESSENTIAL_MISSING",
                    f"blueprint.models[{idx}].sbom_link",
                    f"model {model.name!r} lacks a bill-of-materials link",
                )
            )

    if not card.intent.intended_uses:
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "intent.intended_uses",
                "intent must state at least one intended use",
            )
        )

    if not card.hazard_log and card.extras.get(NONE_IDENTIFIED_KEY) is not True:
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "hazard_log",
                "hazard log is empty and the card does not declare "
                f"{NONE_IDENTIFIED_KEY}: true",
            )
        )

    guardrails_by_name = {rail.name: rail for rail in card.guardrails}
    for idx, hazard in enumerate(card.hazard_log):
        if hazard.status not in {"mitigated", "remediated"}:
            continue
        for name in hazard.mitigations:
            rail = guardrails_by_name.get(name)
            if rail is None:
                findings.append(
                    _error(
                        "GUARDRAIL_DESCRIPTION_MISSING",
                        f"hazard_log[{idx}].mitigations",
                        f"mitigation {name!r} is not a declared guardrail",
                    )
                )
            elif not rail.mechanism.strip():
                findings.append(
                    _error(
                        "GUARDRAIL_DESCRIPTION_MISSING",
                        f"hazard_log[{idx}].mitigations",
                        f"guardrail {name!r} has no mechanism description",
                    )
                )

    has_remediation_link = any(
        ref.label == REMEDIATION_LINK_LABEL for ref in card.references
    )
    if not card.remediations and not has_remediation_link:
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "remediations",
                "card has neither remediation entries nor a "
                f"{REMEDIATION_LINK_LABEL!r} reference",
            )
        )

    if not card.governance.security_contact:
        findings.append(
            _error(
                "ESSENTIAL_MISSING",
                "governance.security_contact",
                "card lacks a security contact",
            )
        )

    return _report(findings)


def validate_semantics(card: SystemCard) -> ValidationReport:
    """Cross-reference and syntax checks beyond the essential contract.

    Invariant breaches (dangling hazard refs, history order, scheme
    mismatches, ...) surface here as error findings so that leniently loaded
    cards report their inconsistencies instead of crashing the caller.
    """
    findings: list[Finding] = [
        _error(violation.code, violation.path, violation.message)
        for violation in check_card_invariants(card)
    ]

    def check_url(value: str | None, path: str) -> None:
        if value and not looks_like_url(value):
            findings.append(
                _warning("BAD_URL_SYNTAX", path, f"{value!r} does not look like a URL")
            )

    for idx, ref in enumerate(card.references):
        check_url(ref.url, f"references[{idx}].url")
    for idx, hazard in enumerate(card.hazard_log):
        check_url(hazard.incident_link, f"hazard_log[{idx}].incident_link")
    for idx, entry in enumerate(card.history):
        check_url(entry.incident_link, f"history[{idx}].incident_link")
    for idx, model in enumerate(card.blueprint.models):
        check_url(model.sbom_link or None, f"blueprint.models[{idx}].sbom_link")
        check_url(model.provenance_link or None, f"blueprint.models[{idx}].provenance_link")

    for idx, oss in enumerate(card.optional_components.oss_components):
        if not oss.name.strip() or not oss.version.strip():
            findings.append(
                _warning(
                    "OPTIONAL_MALFORMED",
                    f"optional_components.oss_components[{idx}]",
                    "open-source component entries need a name and a version",
                )
            )

    return _report(findings)


def validate(card: SystemCard) -> ValidationReport:
    """Essential + semantic findings with the combined level."""
    essential = validate_essential(card)
    semantics = validate_semantics(card)
    return _report(list(essential.findings) + list(semantics.findings))


def count_missing_references(report: ValidationReport) -> int:
    return sum(1 for finding in report.findings if finding.code in DANGLING_REF_CODES)
