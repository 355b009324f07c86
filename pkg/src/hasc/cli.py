"""Command-line entry point with CI-stable exit codes.

Exit codes: 0 success/pass, 1 gate block, 2 validation fail, 3 I/O or usage
error, 4 warnings, 5 attestation failure. Results go to stdout (``--format
json`` where applicable), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from datetime import date
from pathlib import Path
from typing import NoReturn

from . import assembly, attest, diffchange, distribution, identifiers, model, policy, render
from .errors import HascError

EXIT_OK = 0
EXIT_BLOCK = 1
EXIT_VALIDATION_FAIL = 2
EXIT_USAGE = 3
EXIT_WARN = 4
EXIT_ATTESTATION = 5

ENV_REGISTRY = "HASC_REGISTRY"
ENV_POLICY = "HASC_POLICY"

DEFAULT_REGISTRY = "ash-registry.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="hasc", description="Hazard-aware system card toolchain")
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("id", help="hazard identifier operations")
    id_sub = p_id.add_subparsers(dest="id_command", required=True)
    p_id_new = id_sub.add_parser("new", help="allocate the next ASH id for a year")
    p_id_new.add_argument("--year", type=int, required=True)
    p_id_new.add_argument("--summary", required=True)
    p_id_new.add_argument(
        "--registry",
        default=None,
        help=f"registry file (default ${ENV_REGISTRY} or ./{DEFAULT_REGISTRY})",
    )
    p_id_new.add_argument("--namespace", default="local", help="namespace for a new registry")

    p_assemble = sub.add_parser("assemble", help="merge fragments and apply the card template")
    p_assemble.add_argument("-f", "--fragment", action="append", default=[], metavar="FILE")
    p_assemble.add_argument("-t", "--template", required=True, metavar="FILE")
    p_assemble.add_argument("-o", "--output", default=None, metavar="FILE")
    p_assemble.add_argument("--out-format", choices=["json", "yaml"], default=None)

    p_validate = sub.add_parser("validate", help="check the essential-component contract")
    p_validate.add_argument("card")
    p_validate.add_argument("--format", choices=["text", "json"], default="text")
    p_validate.add_argument(
        "--warn-ok", action="store_true", help="exit 0 instead of 4 on warnings"
    )

    p_gate = sub.add_parser("gate", help="evaluate release-gate policies against a card")
    p_gate.add_argument("card")
    p_gate.add_argument("--prev", default=None, help="predecessor card file")
    p_gate.add_argument("--policy", default=None, help="policy file (*.hascpolicy)")
    p_gate.add_argument("--builtin", action="store_true", help="use the builtin gates")
    p_gate.add_argument("--format", choices=["text", "json"], default="text")
    p_gate.add_argument("--warn-ok", action="store_true")

    p_diff = sub.add_parser("diff", help="structural diff between two card versions")
    p_diff.add_argument("old")
    p_diff.add_argument("new")
    p_diff.add_argument("--format", choices=["text", "json"], default="text")

    p_changelog = sub.add_parser("changelog", help="draft a changelog entry from a diff")
    p_changelog.add_argument("old")
    p_changelog.add_argument("new")
    p_changelog.add_argument("--version", required=True, metavar="vX.Y[.Z]")
    p_changelog.add_argument("--date", required=True, metavar="YYYY-MM-DD")
    p_changelog.add_argument("--incident-link", default=None)
    p_changelog.add_argument("--summary", default=None, help="override the drafted summary")

    p_render = sub.add_parser("render", help="render a card to Markdown/HTML")
    p_render.add_argument("card")
    p_render.add_argument("--md", default=None, metavar="FILE")
    p_render.add_argument("--html", default=None, metavar="FILE")
    p_render.add_argument("--summary", action="store_true", help="summary variant")
    p_render.add_argument(
        "--include-internal", action="store_true", help="skip public redaction"
    )

    p_sign = sub.add_parser("sign", help="sign the canonical card bytes")
    p_sign.add_argument("card")
    p_sign.add_argument("--key", required=True, help="ed25519 private key (PEM)")
    p_sign.add_argument("--out", default=None, help="attestation file (default <card>.att.json)")
    p_sign.add_argument("--signer", default=None, help="signer identifier")

    p_verify = sub.add_parser("verify", help="verify a card against its attestation")
    p_verify.add_argument("card")
    p_verify.add_argument("attestation")
    p_verify.add_argument("--pub", required=True, help="ed25519 public key (PEM)")

    p_serve = sub.add_parser("serve", help="serve cards over HTTP")
    p_serve.add_argument("--root", required=True, help="card root directory")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument(
        "--internal",
        action="store_true",
        help="serve unredacted cards (default serves the public variant)",
    )
    p_serve.add_argument("--stale-days", type=int, default=180)

    p_fetch = sub.add_parser("fetch", help="download a served card")
    p_fetch.add_argument("url")
    p_fetch.add_argument("-o", "--output", default=None)

    p_consume = sub.add_parser("consume", help="fetch a remote card and gate it")
    p_consume.add_argument("url")
    p_consume.add_argument("--prev", default=None)
    p_consume.add_argument("--policy", default=None)
    p_consume.add_argument("--builtin", action="store_true")
    p_consume.add_argument("--pub", default=None, help="require and verify the attestation")
    p_consume.add_argument("--format", choices=["text", "json"], default="text")
    p_consume.add_argument("--warn-ok", action="store_true")

    p_inventory = sub.add_parser("inventory", help="audit a fleet of cards")
    p_inventory.add_argument("sources", nargs="+", help="card files, directories, or URLs")
    p_inventory.add_argument("--stale-days", type=int, default=180)
    p_inventory.add_argument("--as-of", default=None, metavar="YYYY-MM-DD")
    p_inventory.add_argument("--format", choices=["text", "json"], default="text")

    p_hex = sub.add_parser("hex", help="export exchange statements for every hazard")
    p_hex.add_argument("card")
    p_hex.add_argument("-o", "--output", default=None, metavar="FILE")

    return parser


def _resolve_policies(policy_path: str | None, builtin: bool) -> policy.PolicySet:
    if policy_path:
        text = Path(policy_path).read_text(encoding="utf-8")
        return policy.parse_policy(text, source_name=policy_path)
    if builtin:
        return policy.builtin_policies()
    env_path = os.environ.get(ENV_POLICY, "").strip()
    if env_path:
        text = Path(env_path).read_text(encoding="utf-8")
        return policy.parse_policy(text, source_name=env_path)
    return policy.builtin_policies()


def _verdict_exit(verdict: policy.Verdict, warn_ok: bool) -> int:
    if verdict.outcome == "block":
        return EXIT_BLOCK
    if verdict.outcome == "warn":
        return EXIT_OK if warn_ok else EXIT_WARN
    return EXIT_OK


def _print_verdict(verdict: policy.Verdict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(verdict.to_tree(), indent=2))
        return
    print(f"outcome: {verdict.outcome}")
    for fired in verdict.fired:
        witnesses = f" [{', '.join(fired.witnesses)}]" if fired.witnesses else ""
        print(f"  {fired.severity} {fired.rule}: {fired.message}{witnesses}")


def _cmd_id(args: argparse.Namespace) -> int:
    registry_path = args.registry or os.environ.get(ENV_REGISTRY) or DEFAULT_REGISTRY
    registry = identifiers.load_registry(registry_path, create=True, namespace=args.namespace)
    hazard_id, updated = identifiers.allocate(registry, args.year, args.summary)
    identifiers.store_registry(updated, registry_path)
    print(identifiers.format_hazard_id(hazard_id))
    return EXIT_OK


def _cmd_assemble(args: argparse.Namespace) -> int:
    out_format = args.out_format or (
        model.format_for_path(args.output) if args.output else "json"
    )
    data = assembly.assemble(args.fragment, args.template, out_format)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


def _print_report(report, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report.to_tree(), indent=2))
        return
    print(f"level: {report.level}")
    for finding in report.findings:
        print(f"  {finding.severity} {finding.code} at {finding.path}: {finding.message}")


def _cmd_validate(args: argparse.Namespace) -> int:
    from .errors import CardContractError, CardSyntaxError
    from .validation import Finding, ValidationReport, validate

    try:
        card = model.load_card_file(args.card, check_invariants=False)
        report = validate(card)
    except (CardSyntaxError, CardContractError) as exc:
        report = ValidationReport(
            level="fail",
            findings=(
                Finding(code=exc.code, severity="error", path=exc.path or "$", message=str(exc)),
            ),
        )
    _print_report(report, args.format)
    if report.level == "fail":
        return EXIT_VALIDATION_FAIL
    if report.level == "warn":
        return EXIT_OK if args.warn_ok else EXIT_WARN
    return EXIT_OK


def _cmd_gate(args: argparse.Namespace) -> int:
    policies = _resolve_policies(args.policy, args.builtin)
    card = model.load_card_file(args.card)
    prev = model.load_card_file(args.prev) if args.prev else None
    verdict = policy.evaluate(policies, card, prev)
    _print_verdict(verdict, args.format)
    return _verdict_exit(verdict, args.warn_ok)


def _cmd_diff(args: argparse.Namespace) -> int:
    old = model.load_card_file(args.old)
    new = model.load_card_file(args.new)
    diff = diffchange.diff_cards(old, new)
    if args.format == "json":
        print(json.dumps(diff.to_tree(), indent=2))
        return EXIT_OK
    if diff.is_empty:
        print("cards are identical")
        return EXIT_OK
    for path, value in diff.added:
        print(f"added   {path} = {json.dumps(value, ensure_ascii=False)}")
    for path, value in diff.removed:
        print(f"removed {path} = {json.dumps(value, ensure_ascii=False)}")
    for path, old_value, new_value in diff.changed:
        print(
            f"changed {path}: {json.dumps(old_value, ensure_ascii=False)} -> "
            f"{json.dumps(new_value, ensure_ascii=False)}"
        )
    if diff.hazards_added:
        print("hazards added: " + ", ".join(str(h) for h in diff.hazards_added))
    if diff.hazards_removed:
        print("hazards removed: " + ", ".join(str(h) for h in diff.hazards_removed))
    for change in diff.guardrail_changes:
        print(f"guardrail {change.name}: {change.old_version} -> {change.new_version}")
    for change in diff.model_changes:
        print(f"model {change.name}: {change.old_version} -> {change.new_version}")
    return EXIT_OK


def _cmd_changelog(args: argparse.Namespace) -> int:
    old = model.load_card_file(args.old)
    new = model.load_card_file(args.new)
    diff = diffchange.diff_cards(old, new)
    entry = diffchange.make_changelog_entry(
        diff,
        new_version=model.CardVersion.parse(args.version),
        published=date.fromisoformat(args.date),
        incident_link=args.incident_link,
        summary=args.summary,
    )
    sys.stdout.write(render.render_changelog([entry]))
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    card = model.load_card_file(args.card)
    opts = render.RenderOptions(
        variant="summary" if args.summary else "full",
        include_internal=args.include_internal,
    )
    wrote = False
    if args.md:
        Path(args.md).write_text(render.render_markdown(card, opts), encoding="utf-8")
        wrote = True
    if args.html:
        Path(args.html).write_text(render.render_html(card, opts), encoding="utf-8")
        wrote = True
    if not wrote:
        sys.stdout.write(render.render_markdown(card, opts))
    return EXIT_OK


def _attestation_path(card_path: str) -> str:
    if card_path.endswith(".json"):
        return card_path[: -len(".json")] + ".att.json"
    return card_path + ".att.json"


def _cmd_sign(args: argparse.Namespace) -> int:
    card = model.load_card_file(args.card)
    key = attest.load_private_key(args.key)
    attestation = attest.sign(card, key, signer=args.signer)
    out_path = args.out or _attestation_path(args.card)
    Path(out_path).write_bytes(attest.attestation_to_json(attestation))
    print(attestation.digest)
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    card = model.load_card_file(args.card)
    attestation = attest.attestation_from_json(Path(args.attestation).read_bytes())
    public_key = attest.load_public_key(args.pub)
    result = attest.verify(card, attestation, public_key)
    print(result.reason)
    return EXIT_OK if result.verified else EXIT_ATTESTATION


def _cmd_serve(args: argparse.Namespace) -> int:
    config = distribution.ServeConfig(
        card_root=Path(args.root),
        host=args.host,
        port=args.port,
        public_only=not args.internal,
        staleness_days=args.stale_days,
    )
    server = distribution.serve(config)
    if hasattr(signal, "SIGHUP"):
        signal.signal(signal.SIGHUP, lambda *_: server.reload())
    print(f"serving {args.root} on {server.url}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def _cmd_fetch(args: argparse.Namespace) -> int:
    card, attestation = distribution.fetch(args.url)
    data = model.serialize(card, "json")
    if args.output:
        Path(args.output).write_bytes(data)
        if attestation is not None:
            Path(_attestation_path(args.output)).write_bytes(
                attest.attestation_to_json(attestation)
            )
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


def _cmd_consume(args: argparse.Namespace) -> int:
    policies = _resolve_policies(args.policy, args.builtin)
    prev = model.load_card_file(args.prev) if args.prev else None
    public_key = attest.load_public_key(args.pub) if args.pub else None
    verdict = distribution.consume_and_gate(args.url, policies, prev, public_key)
    _print_verdict(verdict, args.format)
    return _verdict_exit(verdict, args.warn_ok)


def _expand_sources(sources: list[str]) -> list[str]:
    expanded: list[str] = []
    for source in sources:
        path = Path(source)
        if path.is_dir():
            expanded.extend(
                str(p)
                for p in sorted(path.rglob("*"))
                if p.is_file() and p.name.endswith((".hasc.json", ".hasc.yaml", ".hasc.yml"))
            )
        else:
            expanded.append(source)
    return expanded


def _cmd_inventory(args: argparse.Namespace) -> int:
    as_of = date.fromisoformat(args.as_of) if args.as_of else None
    report = distribution.inventory(
        _expand_sources(args.sources), staleness_days=args.stale_days, today=as_of
    )
    if args.format == "json":
        print(json.dumps(report.to_tree(), indent=2))
        return EXIT_OK
    for row in report.rows:
        if row.load_error:
            print(f"{row.source}: {row.load_error}")
            continue
        flags = []
        if row.stale:
            flags.append("STALE")
        if row.missing_references:
            flags.append(f"missing-refs={row.missing_references}")
        flag_text = f" [{', '.join(flags)}]" if flags else ""
        print(
            f"{row.card_id} {row.version} published {row.published} "
            f"level={row.level} errors={row.errors} warnings={row.warnings}{flag_text}"
        )
    totals = report.totals
    print(
        f"total={totals['cards']} stale={totals['stale']} "
        f"missing_refs={totals['with_missing_references']} "
        f"failing={totals['failing']} load_failed={totals['load_failed']}"
    )
    return EXIT_OK


def _cmd_hex(args: argparse.Namespace) -> int:
    card = model.load_card_file(args.card)
    statements = model.export_hex(card)
    data = model.hex_statements_to_json(statements)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


_HANDLERS = {
    "id": _cmd_id,
    "assemble": _cmd_assemble,
    "validate": _cmd_validate,
    "gate": _cmd_gate,
    "diff": _cmd_diff,
    "changelog": _cmd_changelog,
    "render": _cmd_render,
    "sign": _cmd_sign,
    "verify": _cmd_verify,
    "serve": _cmd_serve,
    "fetch": _cmd_fetch,
    "consume": _cmd_consume,
    "inventory": _cmd_inventory,
    "hex": _cmd_hex,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except HascError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
