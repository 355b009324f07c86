import pytest
from hypothesis import given
from hypothesis import strategies as st

from hasc.fieldpath import (
    format_path,
    get_path,
    has_path,
    parse_path,
    path_sort_key,
    remove_path,
    set_path,
)

TREE = {
    "governance": {"owner": "team", "security_contact": "sec@example.com"},
    "hazard_log": [
        {"id": "ASH-2025-0001", "status": "open"},
        {"id": "ASH-2025-0002", "status": "mitigated"},
    ],
}


def test_parse_and_format_round_trip():
    for text in (
        "governance.owner",
        "hazard_log[1].status",
        "hazard_log[id=ASH-2025-0002].status",
        "a.b[0][k=v].c",
    ):
        assert format_path(parse_path(text)) == text


@pytest.mark.parametrize("bad", ["", ".", "a.", "a..b", "a[", "a[]", "a[x]b"])
def test_malformed_paths_rejected(bad):
    with pytest.raises(ValueError):
        parse_path(bad)


def test_get_by_index_and_key():
    assert get_path(TREE, "hazard_log[0].id") == (True, "ASH-2025-0001")
    assert get_path(TREE, "hazard_log[id=ASH-2025-0002].status") == (True, "mitigated")
    assert get_path(TREE, "hazard_log[5].id") == (False, None)
    assert get_path(TREE, "governance.missing") == (False, None)
    assert has_path(TREE, "governance.owner")


def test_remove_and_set():
    import copy

    tree = copy.deepcopy(TREE)
    assert remove_path(tree, "hazard_log[id=ASH-2025-0001]")
    assert [h["id"] for h in tree["hazard_log"]] == ["ASH-2025-0002"]
    assert not remove_path(tree, "hazard_log[id=ASH-2025-0001]")

    set_path(tree, "hazard_log[1]", {"id": "ASH-2025-0003", "status": "open"})
    assert len(tree["hazard_log"]) == 2
    set_path(tree, "governance.owner", "new team")
    assert tree["governance"]["owner"] == "new team"
    set_path(tree, "hazard_log[id=ASH-2025-0003].status", "accepted")
    assert tree["hazard_log"][1]["status"] == "accepted"


def test_sort_key_handles_mixed_segments():
    paths = ["hazard_log[0]", "hazard_log.summary", "hazard_log[id=X].a", "governance"]
    ordered = sorted(paths, key=path_sort_key)
    assert ordered[0] == "governance"


@given(st.lists(st.sampled_from(["a", "b[0]", "b[1]", "b[k=v]", "c.d"]), min_size=1, max_size=4))
def test_sort_key_total_order(paths):
    sorted(paths, key=path_sort_key)  # must never raise on mixed segment kinds
