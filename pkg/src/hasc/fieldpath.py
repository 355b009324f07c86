"""Dotted field-path parsing and navigation over card document trees.

Path grammar: ``key`` segments separated by dots, where a segment may carry
one bracket suffix -- either a list index (``hazard_log[2]``) or a key match
against list elements (``guardrails[name=Medical query safety check]``).
Match values run to the closing bracket and are matched as strings.
"""

from __future__ import annotations

from typing import Any, Union

# str: mapping key; int: list index; (field, value): first list element
# whose field stringifies to value.
Segment = Union[str, int, tuple[str, str]]

_MISSING = object()


def parse_path(text: str) -> tuple[Segment, ...]:
    if not text:
        raise ValueError("empty field path")
    segments: list[Segment] = []
    i = 0
    n = len(text)
    while i < n:
        j = i
        while j < n and text[j] not in ".[":
            j += 1
        key = text[i:j]
        if not key:
            raise ValueError(f"malformed field path {text!r}")
        segments.append(key)
        i = j
        while i < n and text[i] == "[":
            close = text.find("]", i)
            if close < 0:
                raise ValueError(f"unterminated bracket in field path {text!r}")
            inner = text[i + 1 : close]
            if inner.lstrip("-").isdigit():
                segments.append(int(inner))
            elif "=" in inner:
                field, value = inner.split("=", 1)
                segments.append((field.strip(), value.strip()))
            else:
                raise ValueError(f"malformed bracket segment {inner!r} in {text!r}")
            i = close + 1
        if i < n:
            if text[i] != ".":
                raise ValueError(f"malformed field path {text!r}")
            i += 1
            if i == n:
                raise ValueError(f"trailing dot in field path {text!r}")
    return tuple(segments)


def path_sort_key(path: str | tuple[Segment, ...]) -> tuple:
    """Total order over paths; safe for mixed key/index/match segments."""
    segments = parse_path(path) if isinstance(path, str) else path
    key: list[tuple] = []
    for seg in segments:
        if isinstance(seg, str):
            key.append((0, seg))
        elif isinstance(seg, int):
            key.append((1, seg))
        else:
            key.append((2, seg[0], seg[1]))
    return tuple(key)


def format_path(segments: tuple[Segment, ...]) -> str:
    out: list[str] = []
    for seg in segments:
        if isinstance(seg, str):
            if out:
                out.append(".")
            out.append(seg)
        elif isinstance(seg, int):
            out.append(f"[{seg}]")
        else:
            out.append(f"[{seg[0]}={seg[1]}]")
    return "".join(out)


def _step(node: Any, seg: Segment) -> Any:
    if isinstance(seg, str):
        if isinstance(node, dict) and seg in node:
            return node[seg]
        return _MISSING
    if isinstance(seg, int):
        if isinstance(node, list) and 0 <= seg < len(node):
            return node[seg]
        return _MISSING
    field, value = seg
    if isinstance(node, list):
        for item in node:
            if isinstance(item, dict) and str(item.get(field)) == value:
                return item
    return _MISSING


def get_path(tree: Any, path: str | tuple[Segment, ...]) -> tuple[bool, Any]:
    """Resolve a path; returns (found, value)."""
    segments = parse_path(path) if isinstance(path, str) else path
    node = tree
    for seg in segments:
        node = _step(node, seg)
        if node is _MISSING:
            return False, None
    return True, node


def has_path(tree: Any, path: str | tuple[Segment, ...]) -> bool:
    found, _ = get_path(tree, path)
    return found


def remove_path(tree: Any, path: str | tuple[Segment, ...]) -> bool:
    """Delete the value at path in place; returns whether anything was removed."""
    segments = parse_path(path) if isinstance(path, str) else path
    parent = tree
    for seg in segments[:-1]:
        parent = _step(parent, seg)
        if parent is _MISSING:
            return False
    last = segments[-1]
    if isinstance(last, str):
        if isinstance(parent, dict) and last in parent:
            del parent[last]
            return True
        return False
    if isinstance(last, int):
        if isinstance(parent, list) and 0 <= last < len(parent):
            del parent[last]
            return True
        return False
    field, value = last
    if isinstance(parent, list):
        for idx, item in enumerate(parent):
            if isinstance(item, dict) and str(item.get(field)) == value:
                del parent[idx]
                return True
    return False


def set_path(tree: Any, path: str | tuple[Segment, ...], value: Any) -> None:
    """Assign value at path, appending to lists for index == len or unmatched key segments."""
    segments = parse_path(path) if isinstance(path, str) else path
    parent = tree
    for seg in segments[:-1]:
        nxt = _step(parent, seg)
        if nxt is _MISSING:
            raise KeyError(f"cannot descend into missing segment {seg!r}")
        parent = nxt
    last = segments[-1]
    if isinstance(last, str):
        if not isinstance(parent, dict):
            raise KeyError(f"cannot set key {last!r} on {type(parent).__name__}")
        parent[last] = value
    elif isinstance(last, int):
        if not isinstance(parent, list):
            raise KeyError(f"cannot index {type(parent).__name__}")
        if last == len(parent):
            parent.append(value)
        elif 0 <= last < len(parent):
            parent[last] = value
        else:
            raise IndexError(f"index {last} out of range for patch target")
    else:
        field, match = last
        if not isinstance(parent, list):
            raise KeyError(f"cannot key-match into {type(parent).__name__}")
        for idx, item in enumerate(parent):
            if isinstance(item, dict) and str(item.get(field)) == match:
                parent[idx] = value
                return
        parent.append(value)
