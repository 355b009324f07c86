"""Card distribution: a read-only HTTP endpoint, a consuming gate client,
and fleet inventory audits.

The server publishes a snapshot of ``<card_root>/<card_id>/<version>/card.hasc.json``
files. Discovery goes through ``/.well-known/hasc/index.json``; card routes
negotiate JSON or rendered HTML and always carry the canonical digest of the
served variant in the ``ETag`` header. Stored files that fail to parse are
logged and answered with 404 -- a malformed card is never a 500.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import date
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from .attest import Attestation, attestation_from_json, digest
from .attest import verify as verify_attestation
from .errors import HascError, NetworkError, RemoteInvalidError
from .model import (
    CardVersion,
    SystemCard,
    canonicalize,
    load_card_file,
    parse_card,
    redact_public,
)
from .policy import FiredRule, PolicySet, Verdict, evaluate
from .render import RenderOptions, render_html
from .validation import ValidationReport, count_missing_references, validate

log = logging.getLogger("hasc.distribution")

CARD_FILENAME = "card.hasc.json"
ATTESTATION_FILENAME = "card.hasc.att.json"
INDEX_PATH = "/.well-known/hasc/index.json"
DIGEST_HEADER_PREFIX = "sha-256:"


@dataclass(frozen=True)
class ServeConfig:
    card_root: Path
    host: str = "127.0.0.1"
    port: int = 8080
    public_only: bool = True
    staleness_days: int = 180


@dataclass(frozen=True)
class _ServedCard:
    card_id: str
    version: CardVersion
    published: date
    body_json: bytes
    body_html: bytes
    digest: str
    attestation: bytes | None


@dataclass(frozen=True)
class _Snapshot:
    cards: dict[str, dict[str, _ServedCard]] = field(default_factory=dict)
    latest: dict[str, str] = field(default_factory=dict)


def _load_snapshot(config: ServeConfig) -> _Snapshot:
    cards: dict[str, dict[str, _ServedCard]] = {}
    latest: dict[str, CardVersion] = {}
    root = Path(config.card_root)
    for card_file in sorted(root.glob(f"*/*/{CARD_FILENAME}")):
        version_dir = card_file.parent
        card_dir = version_dir.parent
        try:
            card = load_card_file(str(card_file))
            if config.public_only:
                card = redact_public(card)
            body_json = canonicalize(card)
            entry = _ServedCard(
                card_id=card.card_id,
                version=card.version,
                published=card.published,
                body_json=body_json,
                body_html=render_html(card, RenderOptions(include_internal=True)).encode("utf-8"),
                digest=digest(card),
                attestation=(
                    (version_dir / ATTESTATION_FILENAME).read_bytes()
                    if (version_dir / ATTESTATION_FILENAME).exists()
                    else None
                ),
            )
        except HascError as exc:
            log.warning("skipping unloadable card %s: %s", card_file, exc)
            continue
        if card.card_id != card_dir.name or card.version.render() != version_dir.name:
            log.warning(
                "skipping %s: layout says %s/%s but card says %s/%s",
                card_file,
                card_dir.name,
                version_dir.name,
                card.card_id,
                card.version.render(),
            )
            continue
        cards.setdefault(card.card_id, {})[card.version.render()] = entry
        if card.card_id not in latest or card.version > latest[card.card_id]:
            latest[card.card_id] = card.version
    return _Snapshot(
        cards=cards,
        latest={card_id: version.render() for card_id, version in latest.items()},
    )


def _negotiate(accept_header: str) -> str | None:
    """Pick 'json' or 'html' from an Accept header; None when unnegotiable."""
    accept = accept_header.strip() or "*/*"
    offers = []
    for part in accept.split(","):
        media = part.split(";")[0].strip().lower()
        offers.append(media)
    for media in offers:
        if media in {"application/json", "application/*"}:
            return "json"
        if media == "text/html":
            return "html"
        if media in {"*/*", "text/*"}:
            return "json"
    return None


class _Handler(BaseHTTPRequestHandler):
    server_version = "hasc"
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        log.debug("%s %s", self.address_string(), format % args)

    def _send(self, status: int, content_type: str, body: bytes, digest_hex: str | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        if digest_hex is not None:
            self.send_header("ETag", f'"{DIGEST_HEADER_PREFIX}{digest_hex}"')
            self.send_header("X-HASC-Digest", digest_hex)
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def do_HEAD(self) -> None:  # noqa: N802
        self.do_GET()

    def _error(self, status: int, message: str) -> None:
        body = (json.dumps({"error": message}) + "\n").encode("utf-8")
        self._send(status, "application/json; charset=utf-8", body)

    def do_GET(self) -> None:  # noqa: N802
        snapshot: _Snapshot = self.server.snapshot  # type: ignore[attr-defined]
        config: ServeConfig = self.server.config  # type: ignore[attr-defined]
        path = self.path.split("?", 1)[0].rstrip("/") or "/"

        if path == INDEX_PATH.rstrip("/"):
            today = date.today()
            rows = [
                {
                    "card_id": card_id,
                    "latest_version": snapshot.latest[card_id],
                    "url": f"/cards/{card_id}/{snapshot.latest[card_id]}",
                    "stale": (
                        today - snapshot.cards[card_id][snapshot.latest[card_id]].published
                    ).days
                    > config.staleness_days,
                }
                for card_id in sorted(snapshot.cards)
            ]
            body = (json.dumps({"cards": rows}, indent=2) + "\n").encode("utf-8")
            self._send(200, "application/json; charset=utf-8", body)
            return

        parts = [p for p in path.split("/") if p]
        if not parts or parts[0] != "cards" or len(parts) < 3 or len(parts) > 4:
            self._error(404, "unknown path")
            return
        card_id = parts[1]
        version = parts[2]
        want_attestation = len(parts) == 4 and parts[3] == "attestation"
        if len(parts) == 4 and not want_attestation:
            self._error(404, "unknown path")
            return

        versions = snapshot.cards.get(card_id)
        if not versions:
            self._error(404, f"unknown card {card_id!r}")
            return
        if version == "latest":
            version = snapshot.latest[card_id]
        entry = versions.get(version)
        if entry is None:
            self._error(404, f"unknown version {version!r} of {card_id!r}")
            return

        if want_attestation:
            if entry.attestation is None:
                self._error(404, "no attestation published for this version")
                return
            self._send(
                200, "application/json; charset=utf-8", entry.attestation, entry.digest
            )
            return

        flavor = _negotiate(self.headers.get("Accept", "*/*"))
        if flavor is None:
            self._error(406, "card is available as application/json or text/html")
            return
        if flavor == "json":
            self._send(200, "application/json; charset=utf-8", entry.body_json, entry.digest)
        else:
            self._send(200, "text/html; charset=utf-8", entry.body_html, entry.digest)


class CardServer:
    """Read-only card endpoint over an immutable snapshot.

    The snapshot is rebuilt only via reload(); requests in flight keep the
    snapshot they started with.
    """

    def __init__(self, config: ServeConfig):
        self.config = config
        self._httpd = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._httpd.config = config  # type: ignore[attr-defined]
        self._httpd.snapshot = _load_snapshot(config)  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    def reload(self) -> None:
        self._httpd.snapshot = _load_snapshot(self.config)  # type: ignore[attr-defined]

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(config: ServeConfig) -> CardServer:
    """Build the snapshot and return a server ready to run."""
    return CardServer(config)


# ---------------------------------------------------------------------------
# Consumption

def _http_get(url: str, accept: str, timeout: float) -> bytes:
    request = urllib.request.Request(url, headers={"Accept": accept})
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.read()
    except urllib.error.HTTPError as exc:
        raise NetworkError(f"GET {url} failed: HTTP {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
        raise NetworkError(f"GET {url} failed: {exc}") from exc


def fetch(url: str, timeout: float = 10.0) -> tuple[SystemCard, Attestation | None]:
    """Download and parse a card; the attestation comes from the sibling endpoint."""
    body = _http_get(url, "application/json", timeout)
    try:
        card = parse_card(body, "json")
    except HascError as exc:
        raise RemoteInvalidError(
            f"remote card at {url} is invalid: {exc}", detail=exc.code
        ) from exc

    attestation: Attestation | None = None
    try:
        attestation_body = _http_get(url.rstrip("/") + "/attestation", "application/json", timeout)
    except NetworkError:
        attestation_body = None
    if attestation_body is not None:
        try:
            attestation = attestation_from_json(attestation_body)
        except HascError as exc:
            raise RemoteInvalidError(
                f"remote attestation at {url} is invalid: {exc}", detail=exc.code
            ) from exc
    return card, attestation


def consume_and_gate(
    url: str,
    policies: PolicySet,
    prev: SystemCard | None = None,
    public_key: Ed25519PublicKey | None = None,
    timeout: float = 10.0,
) -> Verdict:
    """Fetch a remote card, optionally verify its attestation, and gate it.

    Fetch and verification failures come back as block verdicts with a
    reason, never as exceptions.
    """
    try:
        card, attestation = fetch(url, timeout=timeout)
    except HascError as exc:
        return Verdict(
            outcome="block",
            fired=(
                FiredRule(
                    rule="fetch-failed",
                    severity="block",
                    message=f"{exc.code}: {exc}",
                ),
            ),
        )
    if public_key is not None:
        if attestation is None:
            return Verdict(
                outcome="block",
                fired=(
                    FiredRule(
                        rule="attestation-required",
                        severity="block",
                        message="ATTESTATION_REQUIRED: endpoint publishes no attestation",
                    ),
                ),
            )
        result = verify_attestation(card, attestation, public_key)
        if not result.verified:
            return Verdict(
                outcome="block",
                fired=(
                    FiredRule(
                        rule="attestation-invalid",
                        severity="block",
                        message=f"attestation did not verify: {result.reason}",
                    ),
                ),
            )
    return evaluate(policies, card, prev)


# ---------------------------------------------------------------------------
# Inventory

@dataclass(frozen=True)
class InventoryRow:
    source: str
    card_id: str | None = None
    version: str | None = None
    published: date | None = None
    stale: bool = False
    level: str | None = None
    errors: int = 0
    warnings: int = 0
    missing_references: int = 0
    load_error: str | None = None

    def to_tree(self) -> dict:
        return {
            "source": self.source,
            "card_id": self.card_id,
            "version": self.version,
            "published": None if self.published is None else self.published.isoformat(),
            "stale": self.stale,
            "level": self.level,
            "errors": self.errors,
            "warnings": self.warnings,
            "missing_references": self.missing_references,
            "load_error": self.load_error,
        }


@dataclass(frozen=True)
class InventoryReport:
    rows: tuple[InventoryRow, ...]
    totals: dict

    def to_tree(self) -> dict:
        return {"rows": [row.to_tree() for row in self.rows], "totals": dict(self.totals)}


def _load_for_inventory(source: str, timeout: float) -> SystemCard:
    if source.startswith(("http://", "https://")):
        body = _http_get(source, "application/json", timeout)
        return parse_card(body, "json", check_invariants=False)
    return load_card_file(source, check_invariants=False)


def inventory(
    sources: list[str],
    staleness_days: int = 180,
    today: date | None = None,
    timeout: float = 10.0,
) -> InventoryReport:
    """Audit a fleet of cards for staleness, findings, and dangling references."""
    as_of = today or date.today()
    rows: list[InventoryRow] = []
    for source in sources:
        try:
            card = _load_for_inventory(str(source), timeout)
        except (HascError, OSError) as exc:
            rows.append(InventoryRow(source=str(source), load_error=f"LOAD_FAILED: {exc}"))
            continue
        report: ValidationReport = validate(card)
        rows.append(
            InventoryRow(
                source=str(source),
                card_id=card.card_id,
                version=card.version.render(),
                published=card.published,
                stale=(as_of - card.published).days > staleness_days,
                level=report.level,
                errors=sum(1 for f in report.findings if f.severity == "error"),
                warnings=sum(1 for f in report.findings if f.severity == "warning"),
                missing_references=count_missing_references(report),
            )
        )
    rows.sort(key=lambda row: (row.card_id or "~", row.version or "", row.source))
    totals = {
        "cards": len(rows),
        "stale": sum(1 for row in rows if row.stale),
        "with_missing_references": sum(1 for row in rows if row.missing_references),
        "failing": sum(1 for row in rows if row.level == "fail"),
        "load_failed": sum(1 for row in rows if row.load_error is not None),
    }
    return InventoryReport(rows=tuple(rows), totals=totals)
