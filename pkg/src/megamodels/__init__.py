"""Executable megamodels: a language, validator, and interpreter for
feedback loops in self-adaptive systems."""

from .condlang import TransitionRef, evaluate, parse_condition, to_text
from .errors import Diagnostic, EvalError, MegamodelError, ParseError, SourceSpan
from .interpreter import (
    BehaviorCall,
    ExecutionContext,
    ExecutionInformation,
    LogicalClock,
    MegamodelHandle,
    ModelRepository,
    RunResult,
    RuntimeEnvironment,
    TraceEvent,
    WallClock,
    export_trace,
)
from .metamodel import (
    DecisionOp,
    FinalOp,
    InitialOp,
    MegamodelCall,
    MegamodelDef,
    ModelDecl,
    ModelOp,
    ModelUse,
    Operation,
    PayloadKind,
    Role,
    Transition,
    UseMode,
    inline,
    structural_equals,
    validate,
)
from .textio import parse_megamodel, serialize

__version__ = "0.1.0"

__all__ = [
    "BehaviorCall",
    "DecisionOp",
    "Diagnostic",
    "EvalError",
    "ExecutionContext",
    "ExecutionInformation",
    "FinalOp",
    "InitialOp",
    "LogicalClock",
    "MegamodelCall",
    "MegamodelDef",
    "MegamodelError",
    "MegamodelHandle",
    "ModelDecl",
    "ModelOp",
    "ModelRepository",
    "ModelUse",
    "Operation",
    "ParseError",
    "PayloadKind",
    "Role",
    "RunResult",
    "RuntimeEnvironment",
    "SourceSpan",
    "TraceEvent",
    "Transition",
    "TransitionRef",
    "UseMode",
    "WallClock",
    "evaluate",
    "export_trace",
    "inline",
    "parse_condition",
    "parse_megamodel",
    "serialize",
    "structural_equals",
    "to_text",
    "validate",
]
