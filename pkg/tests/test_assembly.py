import random
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fragment_paths, template_path
from hasc.assembly import (
    Fragment,
    Template,
    apply_template,
    assemble,
    load_template,
    merge_fragments,
)
from hasc.errors import (
    CardContractError,
    EmptyInputError,
    MergeConflictError,
    MissingPipelineFieldError,
)
from hasc.model import parse_card

NOW = datetime(2025, 7, 23, 10, 0, tzinfo=timezone.utc)


def frag(stage: str, payload: dict) -> Fragment:
    return Fragment(stage=stage, payload=payload, produced_at=NOW)


def test_disjoint_union():
    merged = merge_fragments(
        [
            frag("build", {"blueprint": {"architecture_summary": "arch"}}),
            frag("qe", {"evaluations": [{"name": "e", "metric": "m", "value": "1"}]}),
        ]
    )
    assert merged.payload == {
        "blueprint": {"architecture_summary": "arch"},
        "evaluations": [{"name": "e", "metric": "m", "value": "1"}],
    }
    assert merged.stage == "build+qe"


def test_equal_scalars_tolerated():
    merged = merge_fragments(
        [frag("build", {"version": "v1.3"}), frag("security", {"version": "v1.3"})]
    )
    assert merged.payload == {"version": "v1.3"}


def test_scalar_conflict_is_error():
    with pytest.raises(MergeConflictError) as err:
        merge_fragments(
            [frag("build", {"version": "v1.3"}), frag("security", {"version": "v1.2"})]
        )
    assert err.value.path == "version"
    assert (err.value.stage_a, err.value.stage_b) == ("build", "security")


def test_type_clash_is_conflict():
    with pytest.raises(MergeConflictError):
        merge_fragments(
            [frag("build", {"x": {"a": 1}}), frag("qe", {"x": [1]})]
        )


def test_lists_concatenate_in_order():
    merged = merge_fragments(
        [
            frag("build", {"hazard_log": [{"id": "ASH-2025-0001"}]}),
            frag("security", {"hazard_log": [{"id": "ASH-2025-0002"}]}),
        ]
    )
    assert [h["id"] for h in merged.payload["hazard_log"]] == [
        "ASH-2025-0001",
        "ASH-2025-0002",
    ]


def test_merge_empty_input():
    with pytest.raises(EmptyInputError):
        merge_fragments([])


def test_merge_idempotent():
    fragment = frag("build", {"a": {"b": [1, 2]}, "c": "x"})
    assert merge_fragments([fragment, fragment]).payload == fragment.payload


_scalars = st.one_of(st.text(max_size=6), st.integers(-5, 5), st.booleans())
_values = st.one_of(
    _scalars,
    st.lists(_scalars, max_size=3),
    st.dictionaries(st.sampled_from("abc"), _scalars, max_size=3),
)


@given(payload=st.dictionaries(st.sampled_from("pqrs"), _values, max_size=4))
def test_merge_idempotence_property(payload):
    fragment = frag("s", payload)
    assert merge_fragments([fragment, fragment]).payload == payload


def _conflict_free_triple(rng: random.Random) -> list[Fragment]:
    shared = {"version": "v1.0", "card_id": f"c-{rng.randrange(100)}"}
    fragments = []
    for index, stage in enumerate(("build", "qe", "security")):
        payload = {key: value for key, value in shared.items() if rng.random() < 0.7}
        payload[f"only_{stage}"] = {"n": rng.randrange(10)}
        payload["items"] = [rng.randrange(5) for _ in range(rng.randrange(3))]
        payload.setdefault("nested", {})[stage] = [stage, index]
        fragments.append(frag(stage, payload))
    return fragments


def test_merge_associativity_on_conflict_free_triples():
    rng = random.Random(13)
    for _ in range(200):
        a, b, c = _conflict_free_triple(rng)
        left = merge_fragments([merge_fragments([a, b]), c])
        right = merge_fragments([a, merge_fragments([b, c])])
        assert left.payload == right.payload
        assert left.stage == right.stage


# ---------------------------------------------------------------------------
# Template application

def test_scenario_fragments_assemble_to_unsplit_card(scenario_cards):
    for name, expected in scenario_cards.items():
        data = assemble(fragment_paths(name), template_path(), "json")
        assert parse_card(data, "json") == expected


def test_missing_pipeline_field():
    template = Template(defaults={}, required_from_pipeline=("hazard_log",))
    with pytest.raises(MissingPipelineFieldError) as err:
        apply_template(frag("build", {"card_id": "x"}), template)
    assert err.value.paths == ["hazard_log"]


def test_empty_defaults_identity(scenario_cards):
    merged = merge_fragments([load_fragments_for("v1_3")])
    card = apply_template(merged, Template(defaults={}, required_from_pipeline=()))
    assert card == scenario_cards["v1_3"]


def load_fragments_for(version: str) -> Fragment:
    from hasc.assembly import load_fragment

    fragments = [load_fragment(p) for p in fragment_paths(version)]
    merged = merge_fragments(fragments)
    # Identity check needs the full tree, so fold the template defaults in by hand.
    payload = dict(merged.payload)
    payload.setdefault("intent", {}).setdefault(
        "operational_boundaries", "Consumer chat only; no clinical decision support."
    )
    payload.setdefault("governance", {}).setdefault("owner", "AI Health Assistant team")
    return Fragment(stage=merged.stage, payload=payload, produced_at=merged.produced_at)


def test_defaults_never_overwrite_pipeline_values():
    template = Template(
        defaults={"governance": {"owner": "default owner"}}, required_from_pipeline=()
    )
    merged = frag("build", _minimal_payload(owner="pipeline owner"))
    card = apply_template(merged, template)
    assert card.governance.owner == "pipeline owner"


def _minimal_payload(owner: str) -> dict:
    from conftest import base_tree

    tree = base_tree()
    tree["governance"]["owner"] = owner
    return tree


def test_template_defaults_disjoint_from_required(tmp_path):
    bad = tmp_path / "t.json"
    bad.write_text(
        '{"defaults": {"governance": {"owner": "x"}}, '
        '"required_from_pipeline": ["governance.owner"]}'
    )
    with pytest.raises(CardContractError):
        load_template(bad)


def test_assemble_empty_input(tmp_path):
    with pytest.raises(EmptyInputError):
        assemble([], template_path(), "json")


def test_assemble_unreadable_template(tmp_path):
    with pytest.raises(OSError):
        assemble(fragment_paths("v1_3"), tmp_path / "missing-template.json", "json")
