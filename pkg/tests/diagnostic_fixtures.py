"""One minimal fixture per validator diagnostic code.

Each builder returns ``(megamodel, registry)`` such that validating the
megamodel against the registry yields exactly one diagnostic carrying the
fixture's code and nothing else.
"""

from __future__ import annotations

from megamodels import errors
from megamodels.condlang import BoolLit, Count, IntLit, TransitionRef, parse_condition
from megamodels.metamodel import (
    DecisionOp,
    FinalOp,
    InitialOp,
    MegamodelCall,
    MegamodelDef,
    ModelDecl,
    ModelOp,
    ModelUse,
    PayloadKind,
    Transition,
)


def _loop_op(op_id: str = "A") -> ModelOp:
    return ModelOp(op_id, behavior_key="noop", statuses=("done",))


def _valid_base() -> MegamodelDef:
    """Smallest clean megamodel: I -> A -(done)-> F."""
    return MegamodelDef(
        name="Base",
        operations=[InitialOp("I"), FinalOp("F"), _loop_op()],
        transitions=[Transition("I", "A"), Transition("A", "F", status="done")],
    )


def fixture_empty_id():
    def_ = _valid_base()
    def_.models.append(ModelDecl(""))
    return def_, {}


def fixture_dup_id():
    def_ = _valid_base()
    def_.models.extend([ModelDecl("M"), ModelDecl("M")])
    return def_, {}


def fixture_no_initial():
    return MegamodelDef(name="NoInit", operations=[FinalOp("F")]), {}


def fixture_no_final():
    def_ = MegamodelDef(
        name="NoFinal",
        operations=[InitialOp("I"), _loop_op()],
        transitions=[Transition("I", "A"), Transition("A", "A", status="done")],
    )
    return def_, {}


def fixture_payload_ref():
    def_ = _valid_base()
    def_.models.append(ModelDecl("M", payload_kind=PayloadKind.MEGAMODEL, megamodel_ref=None))
    return def_, {}


def fixture_dangling_ref():
    def_ = _valid_base()
    def_.models.append(ModelDecl("M", payload_kind=PayloadKind.MEGAMODEL, megamodel_ref="Nowhere"))
    return def_, {}


def _callee(finals: tuple[str, ...]) -> MegamodelDef:
    ops = [InitialOp("Go"), _loop_op("W")] + [FinalOp(f) for f in finals]
    transitions = [Transition("Go", "W"), Transition("W", finals[0], status="done")]
    callee = MegamodelDef(name="Callee", operations=ops, transitions=transitions)
    if len(finals) > 1:  # keep every final reachable
        callee.operations[1] = ModelOp("W", behavior_key="noop", statuses=("done", "alt"))
        callee.transitions.append(Transition("W", finals[1], status="alt", id="W__alt"))
    return callee


def fixture_unmapped_final():
    callee = _callee(("OK",))
    caller = MegamodelDef(
        name="Caller",
        operations=[
            InitialOp("I"),
            FinalOp("F"),
            MegamodelCall("C", callee="Callee", entry="Go", final_mapping={"OK": "ok", "Failures": "x"}),
        ],
        transitions=[
            Transition("I", "C"),
            Transition("C", "F", status="ok"),
            Transition("C", "F", status="x"),
        ],
    )
    return caller, {"Callee": callee}


def fixture_uncovered_final():
    callee = _callee(("OK", "Failures"))
    caller = MegamodelDef(
        name="Caller",
        operations=[
            InitialOp("I"),
            FinalOp("F"),
            MegamodelCall("C", callee="Callee", entry="Go", final_mapping={"OK": "ok"}),
        ],
        transitions=[Transition("I", "C"), Transition("C", "F", status="ok")],
    )
    return caller, {"Callee": callee}


def fixture_status_mismatch():
    def_ = MegamodelDef(
        name="Mismatch",
        operations=[InitialOp("I"), FinalOp("F"), _loop_op()],
        transitions=[Transition("I", "A"), Transition("A", "F", status="oops")],
    )
    return def_, {}


def fixture_multi_default():
    def_ = MegamodelDef(
        name="MultiDefault",
        operations=[InitialOp("I"), FinalOp("F"), DecisionOp("D")],
        transitions=[
            Transition("I", "D"),
            Transition("D", "F", is_default=True),
            Transition("D", "F", is_default=True),
        ],
    )
    return def_, {}


def fixture_no_default():
    def_ = MegamodelDef(
        name="NoDefault",
        operations=[InitialOp("I"), FinalOp("F"), DecisionOp("D")],
        transitions=[Transition("I", "D"), Transition("D", "F", condition=BoolLit(True))],
    )
    return def_, {}


def fixture_no_condition():
    def_ = MegamodelDef(
        name="NoCondition",
        operations=[InitialOp("I"), FinalOp("F"), DecisionOp("D")],
        transitions=[
            Transition("I", "D"),
            Transition("D", "F"),
            Transition("D", "F", is_default=True),
        ],
    )
    return def_, {}


def fixture_cond_forbidden():
    def_ = MegamodelDef(
        name="CondForbidden",
        operations=[InitialOp("I"), FinalOp("F"), _loop_op()],
        transitions=[
            Transition("I", "A"),
            Transition("A", "F", status="done", condition=BoolLit(True)),
        ],
    )
    return def_, {}


def fixture_final_outgoing():
    def_ = _valid_base()
    def_.transitions.append(Transition("F", "A"))
    return def_, {}


def fixture_initial_outgoing():
    def_ = _valid_base()
    def_.transitions.append(Transition("I", "F"))
    return def_, {}


def fixture_initial_incoming():
    def_ = MegamodelDef(
        name="InitIncoming",
        operations=[InitialOp("I"), InitialOp("I2"), FinalOp("F"), _loop_op()],
        transitions=[
            Transition("I", "A"),
            Transition("I2", "F"),
            Transition("A", "I2", status="done"),
        ],
    )
    return def_, {}


def fixture_no_outgoing():
    def_ = MegamodelDef(
        name="NoOutgoing",
        operations=[InitialOp("I"), InitialOp("I2"), FinalOp("F"), _loop_op()],
        transitions=[Transition("I", "A"), Transition("I2", "F")],
    )
    return def_, {}


def fixture_unreachable():
    def_ = _valid_base()
    def_.operations.append(_loop_op("Z"))
    def_.transitions.append(Transition("Z", "F", status="done"))
    return def_, {}


def fixture_unresolved_ref():
    def_ = MegamodelDef(
        name="BadRef",
        operations=[InitialOp("I"), FinalOp("F"), DecisionOp("D")],
        transitions=[
            Transition("I", "D"),
            Transition("D", "F", condition=parse_condition("count(Nowhere.ok) > 0")),
            Transition("D", "F", is_default=True),
        ],
    )
    return def_, {}


def fixture_type_error():
    def_ = MegamodelDef(
        name="BadType",
        operations=[InitialOp("I"), FinalOp("F"), DecisionOp("D")],
        transitions=[
            Transition("I", "D"),
            Transition("D", "F", condition=IntLit(1)),
            Transition("D", "F", is_default=True),
        ],
    )
    return def_, {}


MINIMAL_FIXTURES = {
    errors.E_EMPTY_ID: fixture_empty_id,
    errors.E_DUP_ID: fixture_dup_id,
    errors.E_NO_INITIAL: fixture_no_initial,
    errors.E_NO_FINAL: fixture_no_final,
    errors.E_PAYLOAD_REF: fixture_payload_ref,
    errors.E_DANGLING_REF: fixture_dangling_ref,
    errors.E_UNMAPPED_FINAL: fixture_unmapped_final,
    errors.E_UNCOVERED_FINAL: fixture_uncovered_final,
    errors.E_STATUS_MISMATCH: fixture_status_mismatch,
    errors.E_MULTI_DEFAULT: fixture_multi_default,
    errors.E_NO_DEFAULT: fixture_no_default,
    errors.E_NO_CONDITION: fixture_no_condition,
    errors.E_COND_FORBIDDEN: fixture_cond_forbidden,
    errors.E_FINAL_OUTGOING: fixture_final_outgoing,
    errors.E_INITIAL_OUTGOING: fixture_initial_outgoing,
    errors.E_INITIAL_INCOMING: fixture_initial_incoming,
    errors.E_NO_OUTGOING: fixture_no_outgoing,
    errors.E_UNREACHABLE: fixture_unreachable,
    errors.E_UNRESOLVED_REF: fixture_unresolved_ref,
    errors.E_TYPE: fixture_type_error,
}
