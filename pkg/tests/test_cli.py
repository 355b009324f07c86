import json
import subprocess
import sys

import pytest
from cryptography.hazmat.primitives import serialization as ser
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from conftest import FIXTURES, base_tree, fragment_paths, template_path
from hasc import model
from hasc.cli import main

V13 = str(FIXTURES / "cards" / "v1_3.hasc.yaml")
V12 = str(FIXTURES / "cards" / "v1_2.hasc.yaml")
CONTACTLESS = str(FIXTURES / "contactless.hasc.json")


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_usage_error_exits_3(capsys):
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 3
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 3


def test_gate_pass_exit_0(capsys):
    code, out, _ = run(["gate", V13, "--prev", V12, "--builtin"], capsys)
    assert code == 0
    assert "outcome: pass" in out


def test_gate_block_exit_1(capsys):
    code, out, _ = run(["gate", CONTACTLESS, "--builtin"], capsys)
    assert code == 1
    assert "outcome: block" in out


def test_gate_warn_exit_4_and_warn_ok(capsys, tmp_path):
    policy_file = tmp_path / "w.hascpolicy"
    policy_file.write_text('rule w warn { when true; message "heads up"; }')
    code, out, _ = run(["gate", V13, "--policy", str(policy_file)], capsys)
    assert code == 4
    code, _, _ = run(["gate", V13, "--policy", str(policy_file), "--warn-ok"], capsys)
    assert code == 0


def test_gate_json_shape(capsys):
    code, out, _ = run(["gate", CONTACTLESS, "--builtin", "--format", "json"], capsys)
    assert code == 1
    verdict = json.loads(out)
    assert verdict["outcome"] == "block"
    fired = verdict["fired"]
    assert {f["rule"] for f in fired} >= {"missing-security-contact"}
    assert all(set(f) == {"rule", "severity", "message", "witnesses"} for f in fired)


def test_gate_env_policy(monkeypatch, capsys, tmp_path):
    policy_file = tmp_path / "env.hascpolicy"
    policy_file.write_text('rule e block { when true; message "from env"; }')
    monkeypatch.setenv("HASC_POLICY", str(policy_file))
    code, out, _ = run(["gate", V13], capsys)
    assert code == 1
    assert "from env" in out


def test_validate_pass_and_json_shape(capsys):
    code, out, _ = run(["validate", V13, "--format", "json"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report == {"level": "pass", "findings": []}


def test_validate_fail_exit_2(capsys, tmp_path):
    tree = base_tree()
    del tree["governance"]["security_contact"]
    card_file = tmp_path / "bad.hasc.json"
    card_file.write_bytes(model.serialize(model.card_from_tree(tree), "json"))
    code, out, _ = run(["validate", str(card_file)], capsys)
    assert code == 2
    assert "ESSENTIAL_MISSING" in out


def test_validate_invariant_broken_file_reports_fail(capsys, tmp_path):
    tree = base_tree(
        guardrails=[
            {"name": "g", "version": "v1.0.0", "mechanism": "m", "covers": ["ASH-2025-9999"]}
        ]
    )
    card = model.card_from_tree(tree, check_invariants=False)
    card_file = tmp_path / "dangling.hasc.json"
    card_file.write_bytes(model.serialize(card, "json"))
    code, out, _ = run(["validate", str(card_file)], capsys)
    assert code == 2
    assert "DANGLING_HAZARD_REF" in out


def test_validate_warn_exit_4(capsys, tmp_path):
    tree = base_tree()
    tree["references"].append({"label": "docs", "url": "notaurl"})
    card_file = tmp_path / "warny.hasc.json"
    card_file.write_bytes(model.serialize(model.card_from_tree(tree), "json"))
    code, _, _ = run(["validate", str(card_file)], capsys)
    assert code == 4
    code, _, _ = run(["validate", str(card_file), "--warn-ok"], capsys)
    assert code == 0


def test_validate_missing_file_exit_3(capsys):
    code, _, err = run(["validate", str(FIXTURES / "missing.json")], capsys)
    assert code == 3
    assert "error" in err


def test_assemble_writes_card(capsys, tmp_path):
    out_file = tmp_path / "card.hasc.json"
    argv = ["assemble", "-t", template_path(), "-o", str(out_file)]
    for fragment in fragment_paths("v1_3"):
        argv.extend(["-f", fragment])
    code, _, _ = run(argv, capsys)
    assert code == 0
    assembled = model.load_card_file(str(out_file))
    assert assembled == model.load_card_file(V13)


def test_assemble_conflict_exit_3(capsys, tmp_path):
    fragment = tmp_path / "conflict.fragment.yaml"
    fragment.write_text(
        "stage: rogue\nproduced_at: 2025-07-23T10:30:00Z\npayload:\n  version: v9.9\n"
    )
    argv = ["assemble", "-t", template_path(), "-o", str(tmp_path / "out.json")]
    for path in [*fragment_paths("v1_3"), str(fragment)]:
        argv.extend(["-f", path])
    code, _, err = run(argv, capsys)
    assert code == 3
    assert "CONFLICT" in err


def test_diff_json_shape(capsys):
    code, out, _ = run(["diff", V12, V13, "--format", "json"], capsys)
    assert code == 0
    diff = json.loads(out)
    assert diff["hazards_added"] == ["ASH-2025-0142"]
    assert {c["name"] for c in diff["guardrail_changes"]} == {"Medical query safety check"}
    assert any(c["path"] == "blueprint.system_prompt_doc" for c in diff["changed"])


def test_changelog_output(capsys):
    code, out, _ = run(
        [
            "changelog",
            V12,
            V13,
            "--version",
            "v1.3",
            "--date",
            "2025-07-23",
            "--incident-link",
            "https://incidents.example.com/2025-07-23a",
        ],
        capsys,
    )
    assert code == 0
    for label in (
        "Change type",
        "Associated hazard(s)",
        "Summary",
        "Affected components",
        "Linked incident report",
    ):
        assert label in out
    assert "Minor (safety enhancement)" in out


def test_render_writes_files(capsys, tmp_path):
    md = tmp_path / "card.md"
    html = tmp_path / "card.html"
    code, _, _ = run(["render", V13, "--md", str(md), "--html", str(html)], capsys)
    assert code == 0
    assert "## Hazard Log" in md.read_text()
    assert 'id="hazard-ASH-2025-0142"' in html.read_text()


def test_id_new_uses_registry(capsys, tmp_path, monkeypatch):
    registry = tmp_path / "ash-registry.json"
    monkeypatch.setenv("HASC_REGISTRY", str(registry))
    code, out, _ = run(["id", "new", "--year", "2025", "--summary", "first hazard"], capsys)
    assert code == 0
    assert out.strip() == "ASH-2025-0001"
    code, out, _ = run(["id", "new", "--year", "2025", "--summary", "second hazard"], capsys)
    assert out.strip() == "ASH-2025-0002"
    assert registry.exists()


def test_sign_and_verify_exit_codes(capsys, tmp_path):
    key = Ed25519PrivateKey.generate()
    priv = tmp_path / "priv.pem"
    pub = tmp_path / "pub.pem"
    priv.write_bytes(
        key.private_bytes(ser.Encoding.PEM, ser.PrivateFormat.PKCS8, ser.NoEncryption())
    )
    pub.write_bytes(
        key.public_key().public_bytes(
            ser.Encoding.PEM, ser.PublicFormat.SubjectPublicKeyInfo
        )
    )
    card_file = tmp_path / "card.hasc.json"
    card_file.write_bytes(model.serialize(model.load_card_file(V13), "json"))

    att_file = tmp_path / "card.hasc.att.json"
    code, out, _ = run(["sign", str(card_file), "--key", str(priv), "--out", str(att_file)], capsys)
    assert code == 0 and att_file.exists()

    code, out, _ = run(["verify", str(card_file), str(att_file), "--pub", str(pub)], capsys)
    assert code == 0
    assert out.strip() == "ok"

    # Mutate one field: verification must fail with exit 5.
    tree = json.loads(card_file.read_text())
    tree["governance"]["owner"] = "someone else"
    card_file.write_text(json.dumps(tree))
    code, out, _ = run(["verify", str(card_file), str(att_file), "--pub", str(pub)], capsys)
    assert code == 5
    assert out.strip() == "DIGEST_MISMATCH"


def test_hex_output(capsys, tmp_path):
    out_file = tmp_path / "card.hex.json"
    code, _, _ = run(["hex", V13, "-o", str(out_file)], capsys)
    assert code == 0
    statements = json.loads(out_file.read_text())
    assert [s["status"] for s in statements] == ["affected", "fixed"]
    assert all(s["product"] == "ai-health-assistant" for s in statements)


def test_inventory_text_and_json(capsys, tmp_path):
    card_file = tmp_path / "one.hasc.json"
    card_file.write_bytes(model.serialize(model.load_card_file(V13), "json"))
    code, out, _ = run(
        ["inventory", str(tmp_path), "--stale-days", "180", "--as-of", "2026-07-23",
         "--format", "json"],
        capsys,
    )
    assert code == 0
    report = json.loads(out)
    assert report["totals"] == {
        "cards": 1,
        "stale": 1,
        "with_missing_references": 0,
        "failing": 0,
        "load_failed": 0,
    }


def test_consume_against_server(served, capsys):
    code, out, _ = run(
        [
            "consume",
            served.url + "/cards/ai-health-assistant/latest",
            "--builtin",
            "--prev",
            str(served.prev_file),
            "--pub",
            str(served.pub_pem),
        ],
        capsys,
    )
    assert code == 0
    assert "outcome: pass" in out

    code, out, _ = run(
        ["consume", served.url + "/cards/demo-connector/latest", "--builtin"], capsys
    )
    assert code == 1


def test_fetch_to_file(served, capsys, tmp_path):
    out_file = tmp_path / "fetched.hasc.json"
    code, _, _ = run(
        ["fetch", served.url + "/cards/ai-health-assistant/v1.2", "-o", str(out_file)],
        capsys,
    )
    assert code == 0
    assert model.load_card_file(str(out_file)).version.render() == "v1.2"
    assert (tmp_path / "fetched.hasc.att.json").exists()


def test_console_script_help():
    result = subprocess.run(
        [sys.executable, "-m", "hasc.cli", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    for command in ("assemble", "validate", "gate", "diff", "changelog", "render",
                    "sign", "verify", "serve", "fetch", "consume", "inventory", "hex"):
        assert command in result.stdout


def test_serve_subprocess(served, tmp_path):
    import time
    import urllib.request

    process = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "hasc.cli",
            "serve",
            "--root",
            str(served.root),
            "--port",
            "0",
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = ""
        for _ in range(10):  # diagnostics (e.g. the broken fixture card) come first
            line = process.stderr.readline()
            if "serving" in line:
                break
        assert "serving" in line
        url = line.strip().split(" on ")[-1]
        deadline = time.monotonic() + 5
        while True:
            try:
                with urllib.request.urlopen(url + "/.well-known/hasc/index.json") as response:
                    body = json.loads(response.read())
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)
        assert any(row["card_id"] == "ai-health-assistant" for row in body["cards"])
    finally:
        process.terminate()
        process.wait(timeout=5)
