from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from hasc import attest, distribution, model

FIXTURES = Path(__file__).parent / "fixtures"

SCENARIO_VERSIONS = ("v1_0", "v1_2", "v1_3")


@pytest.fixture(scope="session")
def scenario_cards() -> dict[str, model.SystemCard]:
    return {
        name: model.load_card_file(str(FIXTURES / "cards" / f"{name}.hasc.yaml"))
        for name in SCENARIO_VERSIONS
    }


@pytest.fixture(scope="session")
def contactless_card() -> model.SystemCard:
    return model.load_card_file(str(FIXTURES / "contactless.hasc.json"))


def fragment_paths(version: str) -> list[str]:
    return [
        str(FIXTURES / "fragments" / version / f"{stage}.fragment.yaml")
        for stage in ("build", "qe", "security")
    ]


def template_path() -> str:
    return str(FIXTURES / "template.json")


def base_tree(**overrides) -> dict:
    """Minimal valid card tree; tests override fields to build edge cases."""
    tree = {
        "card_id": "unit-card",
        "version": "v1.0",
        "published": "2025-03-01",
        "blueprint": {
            "architecture_summary": "Single model behind an API.",
            "components": [{"name": "core-model", "kind": "model", "version": "v1"}],
            "models": [
                {
                    "name": "core-model",
                    "version": "core-model-v1",
                    "sbom_link": "https://example.com/sbom.json",
                    "provenance_link": "https://example.com/prov.json",
                }
            ],
        },
        "intent": {"intended_uses": ["unit testing"]},
        "hazard_log": [],
        "history": [
            {
                "version": "v1.0",
                "published": "2025-03-01",
                "change_type": "major",
                "change_label": "initial release",
                "summary": "First release.",
            }
        ],
        "governance": {"owner": "unit team", "security_contact": "sec@example.com"},
        "references": [
            {"label": "remediation_link", "url": "https://example.com/fixes"}
        ],
        "none_identified": True,
    }
    tree.update(overrides)
    return tree


@dataclass
class ServedFixture:
    server: distribution.CardServer
    url: str
    root: Path
    pub_pem: Path
    prev_file: Path


@pytest.fixture(scope="session")
def served(tmp_path_factory, scenario_cards, contactless_card) -> ServedFixture:
    """Card server over the scenario fleet, with attestations on the public variants."""
    root = tmp_path_factory.mktemp("card-root")
    key = Ed25519PrivateKey.generate()
    pub_pem = tmp_path_factory.mktemp("keys") / "pub.pem"
    pub_pem.write_bytes(
        key.public_key().public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
        )
    )

    for card in (scenario_cards["v1_2"], scenario_cards["v1_3"]):
        card_dir = root / card.card_id / card.version.render()
        card_dir.mkdir(parents=True)
        (card_dir / distribution.CARD_FILENAME).write_bytes(model.serialize(card, "json"))
        public_variant = model.redact_public(card)
        (card_dir / distribution.ATTESTATION_FILENAME).write_bytes(
            attest.attestation_to_json(attest.sign(public_variant, key))
        )
    # The contact-less card is published without an attestation.
    no_contact_dir = root / contactless_card.card_id / contactless_card.version.render()
    no_contact_dir.mkdir(parents=True)
    (no_contact_dir / distribution.CARD_FILENAME).write_bytes(
        model.serialize(contactless_card, "json")
    )
    # A malformed stored card must never surface as a 500.
    broken_dir = root / "broken-card" / "v1.0"
    broken_dir.mkdir(parents=True)
    (broken_dir / distribution.CARD_FILENAME).write_bytes(b'{"card_id": truncated')

    prev_file = tmp_path_factory.mktemp("prev") / "v1_2.hasc.json"
    prev_file.write_bytes(model.serialize(scenario_cards["v1_2"], "json"))

    server = distribution.serve(
        distribution.ServeConfig(card_root=root, host="127.0.0.1", port=0)
    )
    server.start_background()
    yield ServedFixture(
        server=server, url=server.url, root=root, pub_pem=pub_pem, prev_file=prev_file
    )
    server.shutdown()
