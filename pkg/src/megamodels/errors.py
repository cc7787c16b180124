"""Stable error and diagnostic codes shared across the package.

Validation problems are reported as ``Diagnostic`` values (codes ``E_*``)
and never raised; everything else surfaces as ``MegamodelError`` (or a
subclass) carrying one of the ``ERR_*`` codes.
"""

from __future__ import annotations

from dataclasses import dataclass

# --- validation diagnostic codes (metamodel.validate) ---
E_EMPTY_ID = "E_EMPTY_ID"
E_DUP_ID = "E_DUP_ID"
E_NO_INITIAL = "E_NO_INITIAL"
E_NO_FINAL = "E_NO_FINAL"
E_PAYLOAD_REF = "E_PAYLOAD_REF"
E_DANGLING_REF = "E_DANGLING_REF"
E_UNMAPPED_FINAL = "E_UNMAPPED_FINAL"
E_UNCOVERED_FINAL = "E_UNCOVERED_FINAL"
E_STATUS_MISMATCH = "E_STATUS_MISMATCH"
E_MULTI_DEFAULT = "E_MULTI_DEFAULT"
E_NO_DEFAULT = "E_NO_DEFAULT"
E_NO_CONDITION = "E_NO_CONDITION"
E_COND_FORBIDDEN = "E_COND_FORBIDDEN"
E_FINAL_OUTGOING = "E_FINAL_OUTGOING"
E_INITIAL_OUTGOING = "E_INITIAL_OUTGOING"
E_INITIAL_INCOMING = "E_INITIAL_INCOMING"
E_NO_OUTGOING = "E_NO_OUTGOING"
E_UNREACHABLE = "E_UNREACHABLE"
E_UNRESOLVED_REF = "E_UNRESOLVED_REF"
E_TYPE = "E_TYPE"

#: Every diagnostic code the validator can emit, in a stable order.
DIAGNOSTIC_CODES = (
    E_EMPTY_ID,
    E_DUP_ID,
    E_NO_INITIAL,
    E_NO_FINAL,
    E_PAYLOAD_REF,
    E_DANGLING_REF,
    E_UNMAPPED_FINAL,
    E_UNCOVERED_FINAL,
    E_STATUS_MISMATCH,
    E_MULTI_DEFAULT,
    E_NO_DEFAULT,
    E_NO_CONDITION,
    E_COND_FORBIDDEN,
    E_FINAL_OUTGOING,
    E_INITIAL_OUTGOING,
    E_INITIAL_INCOMING,
    E_NO_OUTGOING,
    E_UNREACHABLE,
    E_UNRESOLVED_REF,
    E_TYPE,
)

# --- parse errors (textio, condlang) ---
ERR_SYNTAX = "ERR_SYNTAX"
ERR_DUP_NAME = "ERR_DUP_NAME"
ERR_TYPE = "ERR_TYPE"

# --- condition evaluation faults ---
ERR_DIV_ZERO = "ERR_DIV_ZERO"
ERR_OVERFLOW = "ERR_OVERFLOW"
ERR_UNRESOLVED_REF = "ERR_UNRESOLVED_REF"

# --- interpreter / adaptation errors and run faults ---
ERR_DUPLICATE_NAME = "ERR_DUPLICATE_NAME"
ERR_INVALID = "ERR_INVALID"
ERR_UNKNOWN_MEGAMODEL = "ERR_UNKNOWN_MEGAMODEL"
ERR_UNKNOWN_ENTRY = "ERR_UNKNOWN_ENTRY"
ERR_UNKNOWN_ELEMENT = "ERR_UNKNOWN_ELEMENT"
ERR_REENTRANT = "ERR_REENTRANT"
ERR_ACTIVE_ELEMENT = "ERR_ACTIVE_ELEMENT"
ERR_RECURSIVE_CALL = "ERR_RECURSIVE_CALL"
ERR_CONDITION_REMAP = "ERR_CONDITION_REMAP"
ERR_BAD_STATUS = "ERR_BAD_STATUS"
ERR_NO_BEHAVIOR = "ERR_NO_BEHAVIOR"
ERR_BEHAVIOR = "ERR_BEHAVIOR"
ERR_USE_VIOLATION = "ERR_USE_VIOLATION"
ERR_STEP_LIMIT = "ERR_STEP_LIMIT"


@dataclass(frozen=True)
class SourceSpan:
    """1-based position of an element or error inside a source file."""

    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding. ``element`` is the offending element's id."""

    code: str
    megamodel: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} {self.megamodel}/{self.element}: {self.message}"


class MegamodelError(Exception):
    """Hard error with a stable code: bad API call, failed adaptation, recursion."""

    def __init__(self, code: str, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.diagnostics: list[Diagnostic] = list(diagnostics or [])


class ParseError(MegamodelError):
    """Syntax or well-formedness error while reading textual input."""

    def __init__(self, code: str, message: str, span: SourceSpan | None = None):
        pos = f" at {span}" if span else ""
        super().__init__(code, f"{message}{pos}")
        self.raw_message = message
        self.span = span


class EvalError(MegamodelError):
    """Condition evaluation fault; aborts the current megamodel run."""
