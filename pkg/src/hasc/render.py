"""Deterministic Markdown and HTML rendering of cards and changelogs.

Section order is fixed so cards from different vendors read the same way.
All card-supplied text is escaped; rendered HTML is a standalone document
with no external assets and never executes card content.
"""

from __future__ import annotations

import html
from dataclasses import dataclass

from .identifiers import format_hazard_id
from .model import SystemCard, VersionHistoryEntry, redact_public


@dataclass(frozen=True)
class RenderOptions:
    variant: str = "full"  # "full" | "summary"
    include_internal: bool = False
    iso_dates: bool = True


def _md(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace("|", "\\|")
    )


def _prepare(card: SystemCard, opts: RenderOptions) -> SystemCard:
    if opts.include_internal:
        return card
    return redact_public(card)


def render_changelog(history: tuple[VersionHistoryEntry, ...] | list, heading: str = "##") -> str:
    """Newest-first changelog with the five field labels per entry."""
    entries = sorted(history, key=lambda e: e.version, reverse=True)
    if not entries:
        return "No history recorded.\n"
    lines: list[str] = []
    for index, entry in enumerate(entries):
        marker = " (Current)" if index == 0 else ""
        lines.append(
            f"{heading} {entry.version.render()}{marker} - Published {entry.published.isoformat()}"
        )
        lines.append("")
        lines.append(
            f"- Change type: {entry.change_type.capitalize()} ({_md(entry.change_label)})"
        )
        if entry.associated_hazards:
            ids = ", ".join(format_hazard_id(h) for h in entry.associated_hazards)
            lines.append(f"- Associated hazard(s): {ids}")
        lines.append(f"- Summary: {_md(entry.summary)}")
        if entry.affected_components:
            lines.append(
                "- Affected components: "
                + "; ".join(_md(component) for component in entry.affected_components)
            )
        if entry.incident_link:
            lines.append(f"- Linked incident report: {_md(entry.incident_link)}")
        lines.append("")
    return "\n".join(lines)


def render_markdown(card: SystemCard, opts: RenderOptions = RenderOptions()) -> str:
    card = _prepare(card, opts)
    out: list[str] = []

    out.append(f"# {_md(card.card_id)} {card.version.render()}")
    out.append("")
    out.append(f"Published {card.published.isoformat()}.")
    out.append("")

    out.append("## Overview & Intent")
    out.append("")
    out.append(_md(card.blueprint.architecture_summary))
    out.append("")
    if card.intent.intended_users:
        out.append("- Intended users: " + ", ".join(_md(u) for u in card.intent.intended_users))
    if card.intent.intended_uses:
        out.append("- Intended uses: " + ", ".join(_md(u) for u in card.intent.intended_uses))
    if card.intent.prohibited_uses:
        out.append(
            "- Prohibited uses: " + ", ".join(_md(u) for u in card.intent.prohibited_uses)
        )
    if card.intent.operational_boundaries:
        out.append("- Operational boundaries: " + _md(card.intent.operational_boundaries))
    out.append("")

    if opts.variant == "summary":
        out.append("## Hazard Log")
        out.append("")
        if card.hazard_log:
            for entry in card.hazard_log:
                out.append(
                    f"- {format_hazard_id(entry.id)} ({entry.status}): {_md(entry.title)}"
                )
        elif card.none_identified():
            out.append("None identified.")
        else:
            out.append("No hazards recorded.")
        out.append("")
        out.append("## Governance")
        out.append("")
        out.append(_governance_markdown(card))
        return "\n".join(out).rstrip("\n") + "\n"

    out.append("## Blueprint")
    out.append("")
    if card.blueprint.components:
        out.append("| Component | Kind | Version |")
        out.append("| --- | --- | --- |")
        for component in card.blueprint.components:
            out.append(
                f"| {_md(component.name)} | {_md(component.kind)} | {_md(component.version)} |"
            )
        out.append("")
    for flow in card.blueprint.data_flows:
        out.append(
            f"- {_md(flow.from_component)} -> {_md(flow.to_component)}: {_md(flow.description)}"
        )
    if card.blueprint.data_flows:
        out.append("")
    if card.blueprint.system_prompt_doc:
        out.append("System prompt: " + _md(card.blueprint.system_prompt_doc))
        out.append("")

    out.append("## Models & Provenance")
    out.append("")
    for model in card.blueprint.models:
        links = []
        if model.sbom_link:
            links.append(f"SBOM: {_md(model.sbom_link)}")
        if model.provenance_link:
            links.append(f"provenance: {_md(model.provenance_link)}")
        suffix = f" ({'; '.join(links)})" if links else ""
        out.append(f"- {_md(model.name)} {_md(model.version)}{suffix}")
    if not card.blueprint.models:
        out.append("No models listed.")
    out.append("")
    for record in card.provenance:
        out.append(
            f"- {record.acquired.isoformat().replace('+00:00', 'Z')} {_md(record.actor)}: "
            f"{_md(record.source)} ({_md(record.transformation)}) digest `{record.content_digest}`"
        )
    if card.provenance:
        out.append("")

    out.append("## Evaluations")
    out.append("")
    if card.evaluations:
        out.append("| Evaluation | Metric | Value |")
        out.append("| --- | --- | --- |")
        for evaluation in card.evaluations:
            out.append(
                f"| {_md(evaluation.name)} | {_md(evaluation.metric)} | {_md(evaluation.value)} |"
            )
    else:
        out.append("No evaluations recorded.")
    out.append("")

    out.append("## Limitations")
    out.append("")
    for limitation in card.limitations:
        out.append(f"- {_md(limitation.category)}: {_md(limitation.description)}")
    if not card.limitations:
        out.append("No limitations recorded.")
    out.append("")

    out.append("## Hazard Log")
    out.append("")
    if card.hazard_log:
        out.append("| Id | Title | Category | Status | Probability |")
        out.append("| --- | --- | --- | --- | --- |")
        for entry in card.hazard_log:
            probability = entry.probability_score or "-"
            out.append(
                f"| {format_hazard_id(entry.id)} | {_md(entry.title)} | {entry.category} "
                f"| {entry.status} | {probability} |"
            )
        out.append("")
        for entry in card.hazard_log:
            out.append(f"### {format_hazard_id(entry.id)}: {_md(entry.title)}")
            out.append("")
            out.append(_md(entry.description))
            if entry.probability_score:
                out.append(
                    f"- Probability {entry.probability_score} given "
                    f"{_md(entry.probability_context or '')}"
                )
            if entry.mitigations:
                out.append("- Mitigations: " + ", ".join(_md(m) for m in entry.mitigations))
            if entry.incident_link:
                out.append(f"- Incident: {_md(entry.incident_link)}")
            out.append("")
    elif card.none_identified():
        out.append("None identified.")
        out.append("")
    else:
        out.append("No hazards recorded.")
        out.append("")

    out.append("## Guardrails")
    out.append("")
    for rail in card.guardrails:
        covers = ", ".join(format_hazard_id(h) for h in rail.covers)
        covers_suffix = f" (covers {covers})" if covers else ""
        out.append(f"- {_md(rail.name)} {_md(rail.version)}{covers_suffix}: {_md(rail.mechanism)}")
    if not card.guardrails:
        out.append("No guardrails declared.")
    out.append("")

    out.append("## Remediations")
    out.append("")
    for remediation in card.remediations:
        out.append(
            f"- {format_hazard_id(remediation.id)} fixed in {remediation.fixed_in.render()}: "
            f"{_md(remediation.summary)}"
        )
    if not card.remediations:
        out.append("No remediations recorded.")
    out.append("")

    out.append("## Version History")
    out.append("")
    out.append(render_changelog(card.history, heading="###"))

    out.append("## Governance")
    out.append("")
    out.append(_governance_markdown(card))
    if card.references:
        out.append("")
        for reference in card.references:
            out.append(f"- {_md(reference.label)}: {_md(reference.url)}")
    return "\n".join(out).rstrip("\n") + "\n"


def _governance_markdown(card: SystemCard) -> str:
    lines = [f"- Owner: {_md(card.governance.owner)}"]
    if card.governance.security_contact:
        lines.append(f"- Security contact: {_md(card.governance.security_contact)}")
    if card.governance.safety_contact:
        lines.append(f"- Safety contact: {_md(card.governance.safety_contact)}")
    return "\n".join(lines)


_HTML_STYLE = """\
body { font-family: system-ui, sans-serif; margin: 2rem auto; max-width: 60rem;
       color: #1a1a24; line-height: 1.5; }
h1, h2 { border-bottom: 1px solid #d5d5e0; padding-bottom: 0.2rem; }
table { border-collapse: collapse; margin: 0.5rem 0; }
th, td { border: 1px solid #c8c8d4; padding: 0.3rem 0.6rem; text-align: left; }
code { background: #f2f2f7; padding: 0 0.25rem; }
.status-open { color: #a02020; font-weight: 600; }
.status-remediated, .status-mitigated { color: #206020; }
"""


def _h(text: str) -> str:
    return html.escape(text, quote=True)


def render_html(card: SystemCard, opts: RenderOptions = RenderOptions()) -> str:
    card = _prepare(card, opts)
    out: list[str] = []
    title = f"{card.card_id} {card.version.render()}"
    out.append("<!DOCTYPE html>")
    out.append('<html lang="en">')
    out.append("<head>")
    out.append('<meta charset="utf-8">')
    out.append(f"<title>{_h(title)}</title>")
    out.append(f"<style>{_HTML_STYLE}</style>")
    out.append("</head>")
    out.append("<body>")
    out.append(f"<h1>{_h(title)}</h1>")
    out.append(f"<p>Published {card.published.isoformat()}.</p>")

    out.append('<h2 id="overview-intent">Overview &amp; Intent</h2>')
    out.append(f"<p>{_h(card.blueprint.architecture_summary)}</p>")
    out.append("<ul>")
    if card.intent.intended_users:
        out.append(
            "<li>Intended users: "
            + ", ".join(_h(u) for u in card.intent.intended_users)
            + "</li>"
        )
    if card.intent.intended_uses:
        out.append(
            "<li>Intended uses: " + ", ".join(_h(u) for u in card.intent.intended_uses) + "</li>"
        )
    if card.intent.prohibited_uses:
        out.append(
            "<li>Prohibited uses: "
            + ", ".join(_h(u) for u in card.intent.prohibited_uses)
            + "</li>"
        )
    if card.intent.operational_boundaries:
        out.append(f"<li>Operational boundaries: {_h(card.intent.operational_boundaries)}</li>")
    out.append("</ul>")

    if opts.variant != "summary":
        out.append('<h2 id="blueprint">Blueprint</h2>')
        if card.blueprint.components:
            out.append("<table><tr><th>Component</th><th>Kind</th><th>Version</th></tr>")
            for component in card.blueprint.components:
                out.append(
                    f"<tr><td>{_h(component.name)}</td><td>{_h(component.kind)}</td>"
                    f"<td>{_h(component.version)}</td></tr>"
                )
            out.append("</table>")
        if card.blueprint.data_flows:
            out.append("<ul>")
            for flow in card.blueprint.data_flows:
                out.append(
                    f"<li>{_h(flow.from_component)} &rarr; {_h(flow.to_component)}: "
                    f"{_h(flow.description)}</li>"
                )
            out.append("</ul>")
        if card.blueprint.system_prompt_doc:
            out.append(f"<p>System prompt: {_h(card.blueprint.system_prompt_doc)}</p>")

        out.append('<h2 id="models-provenance">Models &amp; Provenance</h2>')
        out.append("<ul>")
        for model in card.blueprint.models:
            links = []
            if model.sbom_link:
                links.append(f'<a href="{_h(model.sbom_link)}">SBOM</a>')
            if model.provenance_link:
                links.append(f'<a href="{_h(model.provenance_link)}">provenance</a>')
            suffix = f" ({', '.join(links)})" if links else ""
            out.append(f"<li>{_h(model.name)} {_h(model.version)}{suffix}</li>")
        out.append("</ul>")
        if card.provenance:
            out.append("<ul>")
            for record in card.provenance:
                out.append(
                    f"<li>{_h(record.acquired.isoformat().replace('+00:00', 'Z'))} "
                    f"{_h(record.actor)}: {_h(record.source)} ({_h(record.transformation)}) "
                    f"digest <code>{_h(record.content_digest)}</code></li>"
                )
            out.append("</ul>")

        out.append('<h2 id="evaluations">Evaluations</h2>')
        if card.evaluations:
            out.append("<table><tr><th>Evaluation</th><th>Metric</th><th>Value</th></tr>")
            for evaluation in card.evaluations:
                out.append(
                    f"<tr><td>{_h(evaluation.name)}</td><td>{_h(evaluation.metric)}</td>"
                    f"<td>{_h(evaluation.value)}</td></tr>"
                )
            out.append("</table>")
        else:
            out.append("<p>No evaluations recorded.</p>")

        out.append('<h2 id="limitations">Limitations</h2>')
        if card.limitations:
            out.append("<ul>")
            for limitation in card.limitations:
                out.append(f"<li>{_h(limitation.category)}: {_h(limitation.description)}</li>")
            out.append("</ul>")
        else:
            out.append("<p>No limitations recorded.</p>")

    out.append('<h2 id="hazard-log">Hazard Log</h2>')
    if card.hazard_log:
        for entry in card.hazard_log:
            hid = format_hazard_id(entry.id)
            out.append(f'<h3 id="hazard-{_h(hid)}">{_h(hid)}: {_h(entry.title)}</h3>')
            out.append(
                f'<p><span class="status-{_h(entry.status)}">{_h(entry.status)}</span> '
                f"({_h(entry.category)}), discovered {entry.discovered.isoformat()}.</p>"
            )
            out.append(f"<p>{_h(entry.description)}</p>")
            details = []
            if entry.probability_score:
                details.append(
                    f"Probability {_h(entry.probability_score)} given "
                    f"{_h(entry.probability_context or '')}"
                )
            if entry.mitigations:
                details.append("Mitigations: " + ", ".join(_h(m) for m in entry.mitigations))
            if entry.incident_link:
                details.append(f'Incident: <a href="{_h(entry.incident_link)}">report</a>')
            if details:
                out.append("<ul>" + "".join(f"<li>{d}</li>" for d in details) + "</ul>")
    elif card.none_identified():
        out.append("<p>None identified.</p>")
    else:
        out.append("<p>No hazards recorded.</p>")

    out.append('<h2 id="guardrails">Guardrails</h2>')
    if card.guardrails:
        out.append("<ul>")
        for rail in card.guardrails:
            covers = ", ".join(format_hazard_id(h) for h in rail.covers)
            covers_suffix = f" (covers {_h(covers)})" if covers else ""
            out.append(
                f"<li>{_h(rail.name)} {_h(rail.version)}{covers_suffix}: {_h(rail.mechanism)}</li>"
            )
        out.append("</ul>")
    else:
        out.append("<p>No guardrails declared.</p>")

    if opts.variant != "summary":
        out.append('<h2 id="remediations">Remediations</h2>')
        if card.remediations:
            out.append("<ul>")
            for remediation in card.remediations:
                out.append(
                    f"<li>{_h(format_hazard_id(remediation.id))} fixed in "
                    f"{_h(remediation.fixed_in.render())}: {_h(remediation.summary)}</li>"
                )
            out.append("</ul>")
        else:
            out.append("<p>No remediations recorded.</p>")

        out.append('<h2 id="version-history">Version History</h2>')
        entries = sorted(card.history, key=lambda e: e.version, reverse=True)
        if entries:
            for index, entry in enumerate(entries):
                marker = " (Current)" if index == 0 else ""
                out.append(
                    f'<h3 id="version-{_h(entry.version.render())}">{_h(entry.version.render())}'
                    f"{marker} - Published {entry.published.isoformat()}</h3>"
                )
                out.append("<ul>")
                out.append(
                    f"<li>Change type: {_h(entry.change_type.capitalize())} "
                    f"({_h(entry.change_label)})</li>"
                )
                if entry.associated_hazards:
                    ids = ", ".join(format_hazard_id(h) for h in entry.associated_hazards)
                    out.append(f"<li>Associated hazard(s): {_h(ids)}</li>")
                out.append(f"<li>Summary: {_h(entry.summary)}</li>")
                if entry.affected_components:
                    out.append(
                        "<li>Affected components: "
                        + "; ".join(_h(c) for c in entry.affected_components)
                        + "</li>"
                    )
                if entry.incident_link:
                    out.append(
                        f'<li>Linked incident report: <a href="{_h(entry.incident_link)}">'
                        f"{_h(entry.incident_link)}</a></li>"
                    )
                out.append("</ul>")
        else:
            out.append("<p>No history recorded.</p>")

    out.append('<h2 id="governance">Governance</h2>')
    out.append("<ul>")
    out.append(f"<li>Owner: {_h(card.governance.owner)}</li>")
    if card.governance.security_contact:
        out.append(f"<li>Security contact: {_h(card.governance.security_contact)}</li>")
    if card.governance.safety_contact:
        out.append(f"<li>Safety contact: {_h(card.governance.safety_contact)}</li>")
    out.append("</ul>")
    if card.references and opts.variant != "summary":
        out.append("<ul>")
        for reference in card.references:
            out.append(
                f'<li>{_h(reference.label)}: <a href="{_h(reference.url)}">'
                f"{_h(reference.url)}</a></li>"
            )
        out.append("</ul>")
    out.append("</body>")
    out.append("</html>")
    return "\n".join(out) + "\n"
