"""Release-gate policy language: parser, static checks, and evaluator.

Grammar (comments run ``#`` to end of line)::

    policy  := rule+
    rule    := "rule" NAME ("block" | "warn") "{"
                   "when" expr ";"
                   "message" STRING ";"
               "}"
    expr    := or-expr over: literals (string, decimal, bool), selectors
               (card.<path>, prev.<path>, lambda vars), operators
               (and or not == != < <= > >= matches) and functions
               (exists, count, any, all, semver, days_since)

Selector segments may filter list elements: ``prev.guardrails[name == g.name]``
picks the first element whose field equals the operand. A rule's ``when``
expresses the violation: the rule fires when it evaluates true. Selectors
that do not resolve collapse to false in comparisons, ``exists`` of an absent
path is false, and ``count`` of an absent path is zero, so policies stay
writable against cards from vendors with differing optional fields.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from typing import Any, Union

from .errors import (
    DuplicateRuleError,
    PolicyEvalError,
    PolicySyntaxError,
    PolicyTypeError,
)
from .model import SystemCard, card_to_tree

FUNCTIONS = frozenset({"exists", "count", "any", "all", "semver", "days_since"})
KEYWORDS = frozenset(
    {"rule", "block", "warn", "when", "message", "and", "or", "not", "true", "false", "matches"}
)

_SEMVER_RE = re.compile(r"^v?(\d+)\.(\d+)(?:\.(\d+))?$")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Lit:
    value: Union[str, Decimal, bool]


@dataclass(frozen=True)
class FilterSeg:
    field: str
    value: "Expr"


Segment = Union[str, int, FilterSeg]


@dataclass(frozen=True)
class Sel:
    root: str
    segments: tuple[Segment, ...] = ()


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    parts: tuple["Expr", ...]


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >= matches
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    sel: "Expr"
    var: str | None = None
    body: "Expr" | None = None


Expr = Union[Lit, Sel, Not, BoolOp, Cmp, Call]


@dataclass(frozen=True)
class Rule:
    name: str
    severity: str  # "block" | "warn"
    when: Expr
    message: str


@dataclass(frozen=True)
class PolicySet:
    rules: tuple[Rule, ...]
    source_name: str = "<policy>"


@dataclass(frozen=True)
class FiredRule:
    rule: str
    severity: str
    message: str
    witnesses: tuple[str, ...] = ()

    def to_tree(self) -> dict:
        return {
            "rule": self.rule,
            "severity": self.severity,
            "message": self.message,
            "witnesses": list(self.witnesses),
        }


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "pass" | "warn" | "block"
    fired: tuple[FiredRule, ...] = ()

    def to_tree(self) -> dict:
        return {"outcome": self.outcome, "fired": [f.to_tree() for f in self.fired]}


# ---------------------------------------------------------------------------
# Lexer

@dataclass(frozen=True)
class _Token:
    kind: str  # ident string number punct op eof
    text: str
    line: int
    column: int


_PUNCT = {"{", "}", "(", ")", "[", "]", ";", ",", "."}


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)

    def err(message: str) -> PolicySyntaxError:
        return PolicySyntaxError(message, line=line, column=col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            i += 1
            col += 1
            out: list[str] = []
            while i < n and text[i] != '"':
                if text[i] == "\n":
                    raise PolicySyntaxError(
                        "unterminated string", line=start_line, column=start_col
                    )
                if text[i] == "\\" and i + 1 < n:
                    escape = text[i + 1]
                    out.append({"n": "\n", "t": "\t"}.get(escape, escape))
                    i += 2
                    col += 2
                else:
                    out.append(text[i])
                    i += 1
                    col += 1
            if i >= n:
                raise PolicySyntaxError("unterminated string", line=start_line, column=start_col)
            i += 1
            col += 1
            tokens.append(_Token("string", "".join(out), start_line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(_Token("number", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_-"):
                j += 1
            # Keep "->" intact when an identifier runs straight into an arrow.
            while j > i and text[j - 1] == "-" and j < n and text[j] == ">":
                j -= 1
            tokens.append(_Token("ident", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in {"==", "!=", "<=", ">=", "->"}:
            tokens.append(_Token("op", two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in {"<", ">"}:
            tokens.append(_Token("op", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise err(f"unexpected character {ch!r}")
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _error(self, expected: str) -> PolicySyntaxError:
        tok = self.current
        got = tok.text or "end of input"
        return PolicySyntaxError(
            f"unexpected {got!r}", line=tok.line, column=tok.column, expected=expected
        )

    def advance(self) -> _Token:
        tok = self.current
        self.pos += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self.current
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None, expected: str | None = None) -> _Token:
        tok = self.accept(kind, text)
        if tok is None:
            raise self._error(expected or (text or kind))
        return tok

    def parse_policy(self, source_name: str) -> PolicySet:
        rules: list[Rule] = []
        while self.current.kind != "eof":
            rules.append(self.parse_rule())
        if not rules:
            raise PolicySyntaxError(
                "a policy needs at least one rule", line=1, column=1, expected="'rule'"
            )
        names: set[str] = set()
        for rule in rules:
            if rule.name in names:
                raise DuplicateRuleError(f"rule {rule.name!r} is defined twice")
            names.add(rule.name)
        return PolicySet(rules=tuple(rules), source_name=source_name)

    def parse_rule(self) -> Rule:
        self.expect("ident", "rule", expected="'rule'")
        name_tok = self.expect("ident", expected="rule name")
        name = name_tok.text
        if name in KEYWORDS:
            raise PolicySyntaxError(
                f"{name!r} cannot be used as a rule name",
                line=name_tok.line,
                column=name_tok.column,
                expected="rule name",
            )
        severity_tok = self.expect("ident", expected="'block' or 'warn'")
        if severity_tok.text not in {"block", "warn"}:
            raise PolicySyntaxError(
                f"invalid severity {severity_tok.text!r}",
                line=severity_tok.line,
                column=severity_tok.column,
                expected="'block' or 'warn'",
            )
        self.expect("punct", "{")
        self.expect("ident", "when", expected="'when'")
        when = self.parse_expr()
        self.expect("punct", ";")
        self.expect("ident", "message", expected="'message'")
        message = self.expect("string", expected="message string").text
        self.expect("punct", ";")
        self.expect("punct", "}")
        return Rule(name=name, severity=severity_tok.text, when=when, message=message)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        parts = [self.parse_and()]
        while self.accept("ident", "or"):
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else BoolOp("or", tuple(parts))

    def parse_and(self) -> Expr:
        parts = [self.parse_not()]
        while self.accept("ident", "and"):
            parts.append(self.parse_not())
        return parts[0] if len(parts) == 1 else BoolOp("and", tuple(parts))

    def parse_not(self) -> Expr:
        if self.accept("ident", "not"):
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_operand()
        tok = self.current
        if tok.kind == "op" and tok.text in {"==", "!=", "<", "<=", ">", ">="}:
            self.advance()
            return Cmp(tok.text, left, self.parse_operand())
        if tok.kind == "ident" and tok.text == "matches":
            self.advance()
            return Cmp("matches", left, self.parse_operand())
        return left

    def parse_operand(self) -> Expr:
        if self.accept("punct", "("):
            inner = self.parse_expr()
            self.expect("punct", ")")
            return inner
        tok = self.current
        if tok.kind == "string":
            self.advance()
            return Lit(tok.text)
        if tok.kind == "number":
            self.advance()
            try:
                return Lit(Decimal(tok.text))
            except InvalidOperation:
                raise PolicySyntaxError(
                    f"invalid number {tok.text!r}", line=tok.line, column=tok.column
                ) from None
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return Lit(True)
            if tok.text == "false":
                self.advance()
                return Lit(False)
            if tok.text == "not":
                return self.parse_not()
            if tok.text in FUNCTIONS and self.tokens[self.pos + 1].text == "(":
                return self.parse_call()
            return self.parse_selector()
        raise self._error("a literal, selector, or function call")

    def parse_call(self) -> Expr:
        func = self.advance().text
        self.expect("punct", "(")
        sel = self.parse_operand()
        var: str | None = None
        body: Expr | None = None
        if func in {"any", "all"}:
            self.expect("punct", ",")
            var_tok = self.expect("ident", expected="iteration variable")
            var = var_tok.text
            if var in KEYWORDS or var in FUNCTIONS:
                raise PolicySyntaxError(
                    f"{var!r} cannot be an iteration variable",
                    line=var_tok.line,
                    column=var_tok.column,
                    expected="iteration variable",
                )
            self.expect("op", "->", expected="'->'")
            body = self.parse_expr()
        self.expect("punct", ")")
        return Call(func=func, sel=sel, var=var, body=body)

    def parse_selector(self) -> Sel:
        root_tok = self.expect("ident", expected="selector")
        segments: list[Segment] = []
        segments.extend(self.parse_brackets())
        while self.accept("punct", "."):
            seg_tok = self.expect("ident", expected="field name")
            segments.append(seg_tok.text)
            segments.extend(self.parse_brackets())
        return Sel(root=root_tok.text, segments=tuple(segments))

    def parse_brackets(self) -> list[Segment]:
        segments: list[Segment] = []
        while self.accept("punct", "["):
            tok = self.current
            if tok.kind == "number":
                self.advance()
                if "." in tok.text:
                    raise PolicySyntaxError(
                        "list index must be an integer", line=tok.line, column=tok.column
                    )
                segments.append(int(tok.text))
            else:
                field_tok = self.expect("ident", expected="index or field filter")
                self.expect("op", "==", expected="'=='")
                segments.append(FilterSeg(field=field_tok.text, value=self.parse_operand()))
            self.expect("punct", "]")
        return segments


# ---------------------------------------------------------------------------
# Static type check

_BOOLABLE = {"bool", "unknown"}
_ORDERABLE = {"num", "str", "semver", "unknown"}


def _check_types(expr: Expr, rule: str, scope: set[str]) -> str:
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return "bool"
        if isinstance(expr.value, Decimal):
            return "num"
        return "str"
    if isinstance(expr, Sel):
        if expr.root not in scope:
            raise PolicyTypeError(rule, f"unknown selector root {expr.root!r}")
        for seg in expr.segments:
            if isinstance(seg, FilterSeg):
                _check_types(seg.value, rule, scope)
        return "unknown"
    if isinstance(expr, Not):
        operand = _check_types(expr.operand, rule, scope)
        if operand not in _BOOLABLE:
            raise PolicyTypeError(rule, f"'not' needs a boolean operand, got {operand}")
        return "bool"
    if isinstance(expr, BoolOp):
        for part in expr.parts:
            part_type = _check_types(part, rule, scope)
            if part_type not in _BOOLABLE:
                raise PolicyTypeError(
                    rule, f"{expr.op!r} needs boolean operands, got {part_type}"
                )
        return "bool"
    if isinstance(expr, Cmp):
        left = _check_types(expr.left, rule, scope)
        right = _check_types(expr.right, rule, scope)
        if expr.op == "matches":
            if left not in {"str", "unknown"} or right not in {"str", "unknown"}:
                raise PolicyTypeError(rule, "'matches' compares strings")
            if isinstance(expr.right, Lit) and isinstance(expr.right.value, str):
                try:
                    re.compile(expr.right.value)
                except re.error as exc:
                    raise PolicyTypeError(rule, f"invalid pattern: {exc}") from exc
            return "bool"
        if expr.op in {"==", "!="}:
            if left != "unknown" and right != "unknown" and left != right:
                raise PolicyTypeError(rule, f"cannot compare {left} with {right}")
            return "bool"
        if left not in _ORDERABLE or right not in _ORDERABLE:
            raise PolicyTypeError(rule, f"cannot order {left} against {right}")
        if left != "unknown" and right != "unknown" and left != right:
            raise PolicyTypeError(rule, f"cannot order {left} against {right}")
        return "bool"
    if isinstance(expr, Call):
        if not isinstance(expr.sel, Sel):
            raise PolicyTypeError(rule, f"{expr.func} takes a selector argument")
        _check_types(expr.sel, rule, scope)
        if expr.func in {"any", "all"}:
            assert expr.var is not None and expr.body is not None
            body_type = _check_types(expr.body, rule, scope | {expr.var})
            if body_type not in _BOOLABLE:
                raise PolicyTypeError(
                    rule, f"{expr.func} body must be boolean, got {body_type}"
                )
            return "bool"
        if expr.func == "exists":
            return "bool"
        if expr.func in {"count", "days_since"}:
            return "num"
        return "semver"
    raise PolicyTypeError(rule, f"unsupported expression node {type(expr).__name__}")


def _references_prev(expr: Expr) -> bool:
    if isinstance(expr, Sel):
        if expr.root == "prev":
            return True
        return any(
            isinstance(seg, FilterSeg) and _references_prev(seg.value) for seg in expr.segments
        )
    if isinstance(expr, Not):
        return _references_prev(expr.operand)
    if isinstance(expr, BoolOp):
        return any(_references_prev(part) for part in expr.parts)
    if isinstance(expr, Cmp):
        return _references_prev(expr.left) or _references_prev(expr.right)
    if isinstance(expr, Call):
        if _references_prev(expr.sel):
            return True
        return expr.body is not None and _references_prev(expr.body)
    return False


def parse_policy(text: str, source_name: str = "<policy>") -> PolicySet:
    """Parse policy source; raises PARSE, TYPECHECK, or DUPLICATE_RULE errors."""
    policies = _Parser(_lex(text)).parse_policy(source_name)
    for rule in policies.rules:
        when_type = _check_types(rule.when, rule.name, {"card", "prev"})
        if when_type not in _BOOLABLE:
            raise PolicyTypeError(rule.name, f"'when' must be boolean, got {when_type}")
    return policies


BUILTIN_POLICY_TEXT = """\
# Release gates every card must clear before a production deploy.
rule missing-security-contact block {
    when not exists(card.governance.security_contact);
    message "card lacks a security contact";
}

rule open-hazard-without-mitigation block {
    when any(card.hazard_log, h -> h.status == "open" and count(h.mitigations) == 0);
    message "open hazard without mitigations at {path}";
}

rule guardrail-version-regression block {
    when any(card.guardrails, g ->
        exists(prev.guardrails[name == g.name])
        and semver(g.version) < semver(prev.guardrails[name == g.name].version));
    message "guardrail version regressed at {path}";
}
"""


def builtin_policies() -> PolicySet:
    return parse_policy(BUILTIN_POLICY_TEXT, source_name="builtin")


# ---------------------------------------------------------------------------
# Evaluation

class _Absent:
    def __repr__(self) -> str:
        return "<absent>"


ABSENT = _Absent()


@dataclass(frozen=True)
class _SemVer:
    parts: tuple[int, int, int]


@dataclass
class _EvalContext:
    env: dict[str, tuple[Any, str]]
    witnesses: list[str] = field(default_factory=list)
    today: date | None = None


def _parse_semver(value: Any) -> _SemVer:
    if isinstance(value, _SemVer):
        return value
    if not isinstance(value, str):
        raise PolicyEvalError(f"semver() needs a version string, got {type(value).__name__}")
    match = _SEMVER_RE.match(value)
    if match is None:
        raise PolicyEvalError(f"semver() cannot parse {value!r}")
    major, minor, patch = match.groups()
    return _SemVer((int(major), int(minor), int(patch or 0)))


def _as_number(value: Any) -> Decimal | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, Decimal):
        return value
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, str):
        try:
            return Decimal(value)
        except InvalidOperation:
            return None
    return None


def _resolve(sel: Sel, ctx: _EvalContext) -> tuple[Any, str]:
    if sel.root not in ctx.env:
        raise PolicyEvalError(f"unknown selector root {sel.root!r}")
    node, path = ctx.env[sel.root]
    for seg in sel.segments:
        if node is ABSENT:
            return ABSENT, path
        if isinstance(seg, str):
            if isinstance(node, dict) and seg in node:
                node = node[seg]
                path = f"{path}.{seg}" if path else seg
            else:
                return ABSENT, path
        elif isinstance(seg, int):
            if isinstance(node, list) and 0 <= seg < len(node):
                node = node[seg]
                path = f"{path}[{seg}]"
            else:
                return ABSENT, path
        else:
            if not isinstance(node, list):
                return ABSENT, path
            wanted = _eval(seg.value, ctx)
            found = ABSENT
            for idx, item in enumerate(node):
                if isinstance(item, dict) and _equal(item.get(seg.field, ABSENT), wanted):
                    found = item
                    path = f"{path}[{idx}]"
                    break
            if found is ABSENT:
                return ABSENT, path
            node = found
    if node is None:
        return ABSENT, path
    return node, path


def _equal(left: Any, right: Any) -> bool:
    if left is ABSENT or right is ABSENT:
        return False
    if isinstance(left, _SemVer) or isinstance(right, _SemVer):
        return (
            isinstance(left, _SemVer)
            and isinstance(right, _SemVer)
            and left.parts == right.parts
        )
    if isinstance(left, bool) or isinstance(right, bool):
        return isinstance(left, bool) and isinstance(right, bool) and left == right
    left_num = _as_number(left)
    right_num = _as_number(right)
    if isinstance(left, Decimal) or isinstance(right, Decimal):
        return left_num is not None and right_num is not None and left_num == right_num
    return left == right


def _ordered(op: str, left: Any, right: Any) -> bool:
    if left is ABSENT or right is ABSENT:
        return False
    if isinstance(left, _SemVer) or isinstance(right, _SemVer):
        if not (isinstance(left, _SemVer) and isinstance(right, _SemVer)):
            raise PolicyEvalError("version values only order against other versions")
        lv: Any = left.parts
        rv: Any = right.parts
    else:
        left_num = _as_number(left)
        right_num = _as_number(right)
        if left_num is not None and right_num is not None:
            lv, rv = left_num, right_num
        elif isinstance(left, str) and isinstance(right, str):
            lv, rv = left, right
        else:
            raise PolicyEvalError(
                f"cannot order {type(left).__name__} against {type(right).__name__}"
            )
    if op == "<":
        return lv < rv
    if op == "<=":
        return lv <= rv
    if op == ">":
        return lv > rv
    return lv >= rv


def _truthy(value: Any, context: str) -> bool:
    if value is ABSENT:
        return False
    if isinstance(value, bool):
        return value
    raise PolicyEvalError(f"{context} must produce a boolean, got {type(value).__name__}")


def _eval(expr: Expr, ctx: _EvalContext) -> Any:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Sel):
        value, _ = _resolve(expr, ctx)
        return value
    if isinstance(expr, Not):
        return not _truthy(_eval(expr.operand, ctx), "'not' operand")
    if isinstance(expr, BoolOp):
        if expr.op == "and":
            return all(_truthy(_eval(part, ctx), "'and' operand") for part in expr.parts)
        return any(_truthy(_eval(part, ctx), "'or' operand") for part in expr.parts)
    if isinstance(expr, Cmp):
        left = _eval(expr.left, ctx)
        right = _eval(expr.right, ctx)
        if expr.op == "==":
            return _equal(left, right)
        if expr.op == "!=":
            if left is ABSENT or right is ABSENT:
                return False
            return not _equal(left, right)
        if expr.op == "matches":
            if left is ABSENT or right is ABSENT:
                return False
            if not isinstance(left, str) or not isinstance(right, str):
                raise PolicyEvalError("'matches' compares strings")
            try:
                return re.search(right, left) is not None
            except re.error as exc:
                raise PolicyEvalError(f"invalid pattern {right!r}: {exc}") from exc
        return _ordered(expr.op, left, right)
    if isinstance(expr, Call):
        return _eval_call(expr, ctx)
    raise PolicyEvalError(f"unsupported expression node {type(expr).__name__}")


def _eval_call(call: Call, ctx: _EvalContext) -> Any:
    assert isinstance(call.sel, Sel)
    value, path = _resolve(call.sel, ctx)
    if call.func == "exists":
        return value is not ABSENT
    if call.func == "count":
        if value is ABSENT:
            return Decimal(0)
        if isinstance(value, (list, dict, str)):
            return Decimal(len(value))
        raise PolicyEvalError(f"count() needs a collection, got {type(value).__name__}")
    if call.func == "semver":
        if value is ABSENT:
            return ABSENT
        return _parse_semver(value)
    if call.func == "days_since":
        if value is ABSENT:
            return ABSENT
        if not isinstance(value, str):
            raise PolicyEvalError("days_since() needs an ISO date string")
        try:
            if "T" in value:
                when = datetime.fromisoformat(value.replace("Z", "+00:00")).date()
            else:
                when = date.fromisoformat(value)
        except ValueError as exc:
            raise PolicyEvalError(f"days_since() cannot parse {value!r}") from exc
        today = ctx.today or date.today()
        return Decimal((today - when).days)
    # any / all
    assert call.var is not None and call.body is not None
    if value is ABSENT:
        items: list[Any] = []
    elif isinstance(value, list):
        items = value
    else:
        raise PolicyEvalError(f"{call.func}() needs a list, got {type(value).__name__}")
    shadowed = ctx.env.get(call.var)
    results: list[bool] = []
    for idx, item in enumerate(items):
        item_path = f"{path}[{idx}]"
        ctx.env[call.var] = (item, item_path)
        try:
            hit = _truthy(_eval(call.body, ctx), f"{call.func} body")
        finally:
            if shadowed is None:
                del ctx.env[call.var]
            else:
                ctx.env[call.var] = shadowed
        if hit and call.func == "any":
            ctx.witnesses.append(item_path)
        results.append(hit)
    return any(results) if call.func == "any" else all(results)


def evaluate(
    policies: PolicySet,
    card: SystemCard,
    prev: SystemCard | None = None,
    today: date | None = None,
) -> Verdict:
    """Evaluate every rule; fired rules report in declaration order."""
    card_tree = card_to_tree(card)
    prev_tree = card_to_tree(prev) if prev is not None else None
    fired: list[FiredRule] = []
    for rule in policies.rules:
        if prev_tree is None and _references_prev(rule.when):
            fired.append(
                FiredRule(rule=rule.name, severity="warn", message="predecessor required")
            )
            continue
        env: dict[str, tuple[Any, str]] = {"card": (card_tree, "")}
        if prev_tree is not None:
            env["prev"] = (prev_tree, "")
        ctx = _EvalContext(env=env, today=today)
        if _truthy(_eval(rule.when, ctx), f"rule {rule.name!r}"):
            witnesses = tuple(ctx.witnesses)
            message = rule.message.replace("{path}", ", ".join(witnesses))
            fired.append(
                FiredRule(
                    rule=rule.name,
                    severity=rule.severity,
                    message=message,
                    witnesses=witnesses,
                )
            )
    if any(f.severity == "block" for f in fired):
        outcome = "block"
    elif fired:
        outcome = "warn"
    else:
        outcome = "pass"
    return Verdict(outcome=outcome, fired=tuple(fired))
