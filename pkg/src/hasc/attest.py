"""Attestation: bind a card version to the digest of its canonical bytes.

The detached signature covers the ASCII hex digest prefixed by a fixed
context string, so a card signature can never be replayed as any other kind
of statement. Cards stay byte-identical and diffable; the attestation lives
in a sibling file.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import CardContractError, KeyInvalidError
from .model import CardVersion, SystemCard, canonicalize

SIGNING_CONTEXT = b"hasc-attestation-v1:"
DIGEST_ALG = "sha-256"
SIG_ALG = "ed25519"


@dataclass(frozen=True)
class Attestation:
    card_id: str
    version: CardVersion
    digest: str
    signature: str  # base64
    signer: str
    issued: datetime
    digest_alg: str = DIGEST_ALG
    sig_alg: str = SIG_ALG

    def to_tree(self) -> dict:
        return {
            "card_id": self.card_id,
            "version": self.version.render(),
            "digest_alg": self.digest_alg,
            "digest": self.digest,
            "sig_alg": self.sig_alg,
            "signature": self.signature,
            "signer": self.signer,
            "issued": self.issued.isoformat().replace("+00:00", "Z"),
        }


@dataclass(frozen=True)
class VerifyResult:
    verified: bool
    reason: str  # "ok" | "DIGEST_MISMATCH" | "SIG_INVALID" | "VERSION_MISMATCH"


def digest(card: SystemCard) -> str:
    """SHA-256 hex digest over the canonical card bytes."""
    return hashlib.sha256(canonicalize(card)).hexdigest()


def _signed_payload(digest_hex: str) -> bytes:
    return SIGNING_CONTEXT + digest_hex.encode("ascii")


def signer_id(public_key: Ed25519PublicKey) -> str:
    raw = public_key.public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return hashlib.sha256(raw).hexdigest()[:16]


def sign(
    card: SystemCard,
    signing_key: Ed25519PrivateKey,
    signer: str | None = None,
    issued: datetime | None = None,
) -> Attestation:
    if not isinstance(signing_key, Ed25519PrivateKey):
        raise KeyInvalidError(f"expected an ed25519 private key, got {type(signing_key).__name__}")
    digest_hex = digest(card)
    signature = signing_key.sign(_signed_payload(digest_hex))
    return Attestation(
        card_id=card.card_id,
        version=card.version,
        digest=digest_hex,
        signature=base64.b64encode(signature).decode("ascii"),
        signer=signer or signer_id(signing_key.public_key()),
        issued=(issued or datetime.now(timezone.utc)).astimezone(timezone.utc),
    )


def verify(card: SystemCard, attestation: Attestation, public_key: Ed25519PublicKey) -> VerifyResult:
    """Recompute the digest, compare, then check the signature."""
    digest_hex = digest(card)
    if digest_hex != attestation.digest:
        return VerifyResult(verified=False, reason="DIGEST_MISMATCH")
    if card.version != attestation.version:
        return VerifyResult(verified=False, reason="VERSION_MISMATCH")
    try:
        signature = base64.b64decode(attestation.signature, validate=True)
    except (ValueError, TypeError):
        return VerifyResult(verified=False, reason="SIG_INVALID")
    try:
        public_key.verify(signature, _signed_payload(digest_hex))
    except InvalidSignature:
        return VerifyResult(verified=False, reason="SIG_INVALID")
    return VerifyResult(verified=True, reason="ok")


# ---------------------------------------------------------------------------
# File formats

def attestation_from_tree(tree: dict) -> Attestation:
    if not isinstance(tree, dict):
        raise CardContractError("attestation must be an object", path="$")
    required = (
        "card_id",
        "version",
        "digest_alg",
        "digest",
        "sig_alg",
        "signature",
        "signer",
        "issued",
    )
    missing = sorted(key for key in required if key not in tree)
    if missing:
        raise CardContractError(
            f"attestation missing fields: {', '.join(missing)}", path="$"
        )
    digest_hex = str(tree["digest"])
    if len(digest_hex) != 64 or any(c not in "0123456789abcdef" for c in digest_hex):
        raise CardContractError("digest must be 64 lowercase hex chars", path="digest")
    issued_raw = str(tree["issued"])
    issued_text = issued_raw[:-1] + "+00:00" if issued_raw.endswith("Z") else issued_raw
    try:
        issued = datetime.fromisoformat(issued_text)
    except ValueError as exc:
        raise CardContractError(f"invalid issued timestamp: {exc}", path="issued") from exc
    try:
        version = CardVersion.parse(str(tree["version"]))
    except ValueError as exc:
        raise CardContractError(str(exc), path="version") from exc
    return Attestation(
        card_id=str(tree["card_id"]),
        version=version,
        digest=digest_hex,
        signature=str(tree["signature"]),
        signer=str(tree["signer"]),
        issued=issued,
        digest_alg=str(tree["digest_alg"]),
        sig_alg=str(tree["sig_alg"]),
    )


def attestation_to_json(attestation: Attestation) -> bytes:
    return (json.dumps(attestation.to_tree(), indent=2) + "\n").encode("utf-8")


def attestation_from_json(data: bytes | str) -> Attestation:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CardContractError(f"attestation is not valid JSON: {exc}", path="$") from exc
    return attestation_from_tree(tree)


# ---------------------------------------------------------------------------
# Key loading

def load_private_key(path: str | Path) -> Ed25519PrivateKey:
    try:
        key = serialization.load_pem_private_key(Path(path).read_bytes(), password=None)
    except (ValueError, TypeError) as exc:
        raise KeyInvalidError(f"cannot load private key from {path}: {exc}") from exc
    if not isinstance(key, Ed25519PrivateKey):
        raise KeyInvalidError(f"{path} is not an ed25519 private key")
    return key


def load_public_key(path: str | Path) -> Ed25519PublicKey:
    try:
        key = serialization.load_pem_public_key(Path(path).read_bytes())
    except (ValueError, TypeError) as exc:
        raise KeyInvalidError(f"cannot load public key from {path}: {exc}") from exc
    if not isinstance(key, Ed25519PublicKey):
        raise KeyInvalidError(f"{path} is not an ed25519 public key")
    return key
