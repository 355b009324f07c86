"""Independent patch applier used as the diff soundness oracle.

Applies a diff's removed/changed/added records to a plain tree using only
the public field-path contract, never the diff implementation's internals.
"""

from __future__ import annotations

from typing import Any

from hasc.diffchange import CardDiff
from hasc.fieldpath import path_sort_key, remove_path, set_path


def apply_diff(tree: Any, diff: CardDiff) -> Any:
    for path, _ in sorted(diff.removed, key=lambda pv: path_sort_key(pv[0]), reverse=True):
        assert remove_path(tree, path), f"removal target missing: {path}"
    for path, _, new_value in diff.changed:
        set_path(tree, path, new_value)
    for path, value in diff.added:
        set_path(tree, path, value)
    return tree
