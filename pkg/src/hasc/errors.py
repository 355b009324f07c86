"""Exception hierarchy for the hasc toolchain.

Every error carries a stable machine-readable ``code`` so CLI callers and
tests can dispatch on failure class without string matching.
"""

from __future__ import annotations


class HascError(Exception):
    """Base class for all toolchain errors."""

    code = "ERROR"

    def __init__(self, message: str, *, path: str | None = None):
        self.message = message
        self.path = path
        super().__init__(message if path is None else f"{path}: {message}")


class CardSyntaxError(HascError):
    """Input bytes are not well-formed JSON/YAML."""

    code = "SYNTAX"

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = "" if line is None else f" (line {line}, column {column})"
        super().__init__(f"{message}{where}")


class CardContractError(HascError):
    """Document is well-formed but violates the card schema contract."""

    code = "CONTRACT"


class CardInvariantError(HascError):
    """Document is typed correctly but self-inconsistent."""

    code = "INVARIANT"

    def __init__(self, message: str, *, violations: list[str] | None = None):
        self.violations = violations or [message]
        super().__init__(message)


class NoncanonicalizableError(HascError):
    code = "NONCANONICALIZABLE"


class RedactionError(HascError):
    code = "REDACTION_BREAKS_ESSENTIAL"


class BadIdFormatError(HascError):
    code = "BAD_FORMAT"


class YearOutOfRangeError(HascError):
    code = "YEAR_OUT_OF_RANGE"


class CorruptJournalError(HascError):
    code = "CORRUPT_JOURNAL"


class MergeConflictError(HascError):
    code = "CONFLICT"

    def __init__(self, path: str, stage_a: str, stage_b: str):
        self.stage_a = stage_a
        self.stage_b = stage_b
        super().__init__(
            f"conflicting values from stages {stage_a!r} and {stage_b!r}", path=path
        )


class EmptyInputError(HascError):
    code = "EMPTY_INPUT"


class MissingPipelineFieldError(HascError):
    code = "MISSING_PIPELINE_FIELD"

    def __init__(self, paths: list[str]):
        self.paths = list(paths)
        super().__init__(f"required pipeline fields not supplied: {', '.join(paths)}")


class PolicySyntaxError(HascError):
    code = "PARSE"

    def __init__(self, message: str, *, line: int, column: int, expected: str | None = None):
        self.line = line
        self.column = column
        self.expected = expected
        hint = "" if expected is None else f"; expected {expected}"
        super().__init__(f"{message} (line {line}, column {column}){hint}")


class PolicyTypeError(HascError):
    code = "TYPECHECK"

    def __init__(self, rule: str, reason: str):
        self.rule = rule
        self.reason = reason
        super().__init__(f"rule {rule!r}: {reason}")


class DuplicateRuleError(HascError):
    code = "DUPLICATE_RULE"


class PolicyEvalError(HascError):
    code = "EVAL_TYPE"


class CardIdMismatchError(HascError):
    code = "CARD_ID_MISMATCH"


class KeyInvalidError(HascError):
    code = "KEY_INVALID"


class NetworkError(HascError):
    code = "NETWORK"


class RemoteInvalidError(HascError):
    code = "REMOTE_INVALID"

    def __init__(self, message: str, *, detail: str | None = None):
        self.detail = detail
        super().__init__(message)
