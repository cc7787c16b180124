"""Megamodel interpreter: singleton execution contexts, count/time
bookkeeping, condition-driven branching, synchronous megamodel calls,
trace emission, and the runtime adaptation API.

Execution is single-threaded: one run owns the environment until it
returns. Megamodels are handled as singletons, so counts and timestamps
persist across runs and a megamodel already on the call stack cannot be
re-entered.
"""

from __future__ import annotations

import copy
import json
import time as _time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import condlang
from .errors import (
    ERR_ACTIVE_ELEMENT,
    ERR_BAD_STATUS,
    ERR_BEHAVIOR,
    ERR_DUPLICATE_NAME,
    ERR_INVALID,
    ERR_NO_BEHAVIOR,
    ERR_REENTRANT,
    ERR_STEP_LIMIT,
    ERR_TYPE,
    ERR_UNKNOWN_ELEMENT,
    ERR_UNKNOWN_ENTRY,
    ERR_UNKNOWN_MEGAMODEL,
    ERR_UNRESOLVED_REF,
    ERR_USE_VIOLATION,
    EvalError,
    MegamodelError,
)
from .metamodel import (
    DecisionOp,
    ElementId,
    FinalOp,
    InitialOp,
    MegamodelCall,
    MegamodelDef,
    ModelOp,
    ModelUse,
    Operation,
    PayloadKind,
    Transition,
    UseMode,
    _derive_transition_ids,
    resolve_ref,
    validate,
)


class WallClock:
    """Milliseconds since the epoch."""

    def now(self) -> int:
        return _time.time_ns() // 1_000_000

    def tick(self) -> int:
        return self.now()


class LogicalClock:
    """Deterministic clock: advances by one per trace event."""

    def __init__(self, start: int = 0):
        self.value = start

    def now(self) -> int:
        return self.value

    def tick(self) -> int:
        value = self.value
        self.value += 1
        return value


@dataclass
class ExecutionInformation:
    """Per-transition bookkeeping.

    ``count`` is the number of executions of the source operation since
    this transition was last taken (or since registration if never taken);
    ``time`` is the clock value of the last taking, 0 if never taken.
    """

    count: int = 0
    time: int = 0
    taken: bool = False


@dataclass
class ExecutionContext:
    """Singleton runtime state of one registered megamodel."""

    megamodel: str
    current: ElementId | None = None
    info: dict[ElementId, ExecutionInformation] = field(default_factory=dict)
    active: bool = False


@dataclass(frozen=True)
class TraceEvent:
    """One step of a run. ``detail`` depends on the kind: exit status for
    ``op_exit``, transition id for ``transition_taken``, callee name for
    call events, final id for ``run_end``, fault code for ``fault``, and a
    description for ``adaptation``.
    """

    seq: int
    kind: str
    megamodel: str
    op: ElementId | None
    detail: str | None
    clock: int


@dataclass
class RunResult:
    final: ElementId | None
    fault: str | None
    trace: list[TraceEvent]

    @property
    def ok(self) -> bool:
        return self.fault is None


def export_trace(trace: RunResult | Iterable[TraceEvent]) -> str:
    """Serialize trace events as JSONL with a stable key order."""
    events = trace.trace if isinstance(trace, RunResult) else list(trace)
    lines = [
        json.dumps(
            {
                "seq": ev.seq,
                "kind": ev.kind,
                "megamodel": ev.megamodel,
                "op": ev.op,
                "status": ev.detail,
                "clock": ev.clock,
            },
            separators=(",", ":"),
        )
        for ev in events
    ]
    return "\n".join(lines) + "\n" if lines else ""


class _RunFault(Exception):
    """Internal: aborts the current run; surfaced as a fault trace event."""

    def __init__(self, code: str, message: str, megamodel: str, op: ElementId | None = None):
        super().__init__(message)
        self.code = code
        self.megamodel = megamodel
        self.op = op


class _Tracer:
    def __init__(self, clock):
        self.clock = clock
        self.events: list[TraceEvent] = []

    def emit(self, kind: str, megamodel: str, op: ElementId | None = None, detail: str | None = None) -> TraceEvent:
        ev = TraceEvent(len(self.events), kind, megamodel, op, detail, self.clock.tick())
        self.events.append(ev)
        return ev


@dataclass
class _RepositoryEntry:
    payload: Any = None
    version: int = 0


class ModelRepository:
    """Versioned payload store, keyed by model id (the handle).

    Versions increment exactly when a payload is replaced through a
    write/annotate access or the adaptation API; entries spring into
    existence with a ``None`` payload at version 0.
    """

    def __init__(self) -> None:
        self._entries: dict[str, _RepositoryEntry] = {}

    def _entry(self, handle: str) -> _RepositoryEntry:
        return self._entries.setdefault(handle, _RepositoryEntry())

    def get(self, handle: str) -> Any:
        return self._entry(handle).payload

    def put(self, handle: str, payload: Any) -> None:
        """Seed a payload without a version bump (initial binding)."""
        self._entry(handle).payload = payload

    def replace(self, handle: str, payload: Any) -> int:
        entry = self._entry(handle)
        entry.payload = payload
        entry.version += 1
        return entry.version

    def version(self, handle: str) -> int:
        return self._entry(handle).version

    def snapshot_versions(self) -> dict[str, int]:
        return {h: e.version for h, e in self._entries.items()}


class ModelAccess:
    """A behavior's view of one declared model use."""

    def __init__(self, env: RuntimeEnvironment, megamodel: str, use: ModelUse, payload_kind: PayloadKind,
                 megamodel_ref: str | None):
        self._env = env
        self._megamodel = megamodel
        self._use = use
        self._payload_kind = payload_kind
        self._megamodel_ref = megamodel_ref

    @property
    def model(self) -> ElementId:
        return self._use.model

    @property
    def mode(self) -> UseMode:
        return self._use.mode

    def read(self) -> Any:
        if self._payload_kind is PayloadKind.MEGAMODEL:
            return MegamodelHandle(self._env, self._megamodel_ref or "", self.mode)
        return self._env.repository.get(self._use.model)

    def write(self, payload: Any) -> int:
        if self.mode is not UseMode.WRITE:
            raise MegamodelError(ERR_USE_VIOLATION, f"{self._use.mode.value} access to {self.model!r} cannot write")
        return self._env.repository.replace(self._use.model, payload)

    def annotate(self, payload: Any) -> int:
        if self.mode not in (UseMode.WRITE, UseMode.ANNOTATE):
            raise MegamodelError(ERR_USE_VIOLATION, f"read access to {self.model!r} cannot annotate")
        return self._env.repository.replace(self._use.model, payload)


class MegamodelHandle:
    """Payload view of a megamodel-kind model: the managed megamodel itself.

    Read access exposes the definition and its model payloads; write access
    additionally exposes the adaptation API, which is how a higher-layer
    loop manages a lower-layer one without dedicated sensors or effectors.
    """

    def __init__(self, env: RuntimeEnvironment, name: str, mode: UseMode):
        self._env = env
        self.name = name
        self.mode = mode

    @property
    def definition(self) -> MegamodelDef:
        return self._env.definition(self.name)

    def model_payload(self, model_id: ElementId) -> Any:
        decl = self.definition.model(model_id)
        if decl is None:
            raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no model {model_id!r} in {self.name!r}")
        return self._env.repository.get(decl.id)

    def context_info(self) -> dict[ElementId, ExecutionInformation]:
        return dict(self._env.context(self.name).info)

    def _writable(self) -> None:
        if self.mode is not UseMode.WRITE:
            raise MegamodelError(ERR_USE_VIOLATION, f"read access to megamodel {self.name!r} cannot adapt it")

    def replace_model(self, model_id: ElementId, payload: Any) -> None:
        self._writable()
        self._env.adapt_replace_model(self.name, model_id, payload)

    def set_condition(self, transition_id: ElementId, condition: condlang.Expr | str) -> None:
        self._writable()
        self._env.adapt_set_condition(self.name, transition_id, condition)

    def rewire(self, transition_id: ElementId, new_target: ElementId) -> ElementId:
        self._writable()
        return self._env.adapt_rewire(self.name, transition_id, new_target)

    def add_operation(self, op: Operation, transitions: Sequence[Transition] = ()) -> None:
        self._writable()
        self._env.adapt_add_operation(self.name, op, transitions)

    def remove_operation(self, op_id: ElementId) -> None:
        self._writable()
        self._env.adapt_remove_operation(self.name, op_id)


@dataclass
class BehaviorCall:
    """What a bound behavior receives: accesses for the operation's
    declared model uses, plus the clock value at invocation."""

    megamodel: str
    operation: ModelOp
    now: int
    _accesses: dict[ElementId, ModelAccess]

    def access(self, model_id: ElementId) -> ModelAccess:
        acc = self._accesses.get(model_id)
        if acc is None:
            raise MegamodelError(
                ERR_USE_VIOLATION,
                f"operation {self.operation.id!r} does not declare a use of model {model_id!r}",
            )
        return acc


Behavior = Callable[[BehaviorCall], str]


# --- adaptation edits (applied as an atomic, validated batch) ---


@dataclass(frozen=True)
class SetCondition:
    transition_id: ElementId
    condition: condlang.Expr


@dataclass(frozen=True)
class Rewire:
    transition_id: ElementId
    new_target: ElementId


@dataclass(frozen=True)
class AddOperation:
    operation: Operation
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class RemoveOperation:
    op_id: ElementId


@dataclass(frozen=True)
class AddTransition:
    transition: Transition


@dataclass(frozen=True)
class RemoveTransition:
    transition_id: ElementId


Edit = SetCondition | Rewire | AddOperation | RemoveOperation | AddTransition | RemoveTransition


class RuntimeEnvironment:
    """Owns registered megamodels, their singleton contexts, behavior
    bindings, the model repository, and one clock."""

    def __init__(self, clock: WallClock | LogicalClock | None = None):
        self._defs: dict[str, MegamodelDef] = {}
        self._contexts: dict[str, ExecutionContext] = {}
        self._behaviors: dict[str, Behavior] = {}
        self.repository = ModelRepository()
        self.clock = clock if clock is not None else WallClock()
        self._tracer: _Tracer | None = None
        #: adaptation events emitted while no run was active
        self.adaptation_log: list[TraceEvent] = []

    # -- registration --

    def register(self, def_: MegamodelDef) -> None:
        self.register_all([def_])

    def register_all(self, defs: Sequence[MegamodelDef]) -> None:
        """Register a group of megamodels that may reference each other.
        All-or-nothing: every definition must validate against the union of
        the existing registry and the new group.
        """
        registry = dict(self._defs)
        for def_ in defs:
            if def_.name in registry:
                raise MegamodelError(ERR_DUPLICATE_NAME, f"megamodel {def_.name!r} is already registered")
            registry[def_.name] = def_
        diagnostics = [d for def_ in defs for d in validate(def_, registry)]
        if diagnostics:
            raise MegamodelError(
                ERR_INVALID,
                "; ".join(str(d) for d in diagnostics[:5]),
                diagnostics=diagnostics,
            )
        for def_ in defs:
            self._defs[def_.name] = def_
            self._contexts[def_.name] = ExecutionContext(
                megamodel=def_.name,
                info={t.id: ExecutionInformation() for t in def_.transitions},
            )

    def names(self) -> list[str]:
        return sorted(self._defs)

    def definition(self, megamodel: str) -> MegamodelDef:
        def_ = self._defs.get(megamodel)
        if def_ is None:
            raise MegamodelError(ERR_UNKNOWN_MEGAMODEL, f"megamodel {megamodel!r} is not registered")
        return def_

    def context(self, megamodel: str) -> ExecutionContext:
        self.definition(megamodel)
        return self._contexts[megamodel]

    def bind_behavior(self, key: str, behavior: Behavior) -> None:
        self._behaviors[key] = behavior

    def bind_behaviors(self, behaviors: Mapping[str, Behavior]) -> None:
        for key, behavior in behaviors.items():
            self.bind_behavior(key, behavior)

    # -- execution --

    def run(self, megamodel: str, entry: ElementId, *, max_steps: int | None = None) -> RunResult:
        """Execute from ``entry`` until a final operation is reached.

        Counts and timestamps persist across runs. Behavior and condition
        faults abort the run with a ``fault`` trace event; the result then
        carries the fault code and no final.
        """
        def_ = self.definition(megamodel)
        ctx = self._contexts[megamodel]
        if self._tracer is not None or ctx.active:
            raise MegamodelError(ERR_REENTRANT, f"megamodel {megamodel!r} is already executing")
        entry_op = def_.operation(entry)
        if not isinstance(entry_op, InitialOp):
            raise MegamodelError(ERR_UNKNOWN_ENTRY, f"{entry!r} is not an initial operation of {megamodel!r}")

        tracer = _Tracer(self.clock)
        self._tracer = tracer
        budget = [max_steps] if max_steps is not None else None
        tracer.emit("run_start", megamodel)
        try:
            final = self._execute(megamodel, entry, tracer, budget)
        except _RunFault as fault:
            tracer.emit("fault", fault.megamodel, op=fault.op, detail=fault.code)
            return RunResult(final=None, fault=fault.code, trace=tracer.events)
        else:
            tracer.emit("run_end", megamodel, op=final, detail=final)
            return RunResult(final=final, fault=None, trace=tracer.events)
        finally:
            self._tracer = None

    def _execute(self, megamodel: str, entry: ElementId, tracer: _Tracer, budget: list[int] | None) -> ElementId:
        ctx = self._contexts[megamodel]
        if ctx.active:
            raise _RunFault(ERR_REENTRANT, f"megamodel {megamodel!r} is already on the call stack", megamodel, entry)
        ctx.active = True
        current = entry
        try:
            while True:
                ctx.current = current
                if budget is not None:
                    if budget[0] <= 0:
                        raise _RunFault(ERR_STEP_LIMIT, "step limit exhausted", megamodel, current)
                    budget[0] -= 1
                def_ = self._defs[megamodel]  # re-read: adaptations apply mid-run
                op = def_.operation(current)
                if op is None:
                    raise _RunFault(ERR_UNKNOWN_ELEMENT, f"operation {current!r} vanished", megamodel, current)

                if isinstance(op, FinalOp):
                    return op.id

                if isinstance(op, InitialOp):
                    transition = def_.outgoing(op.id)[0]
                elif isinstance(op, ModelOp):
                    transition = self._execute_model_op(megamodel, def_, op, tracer)
                elif isinstance(op, DecisionOp):
                    transition = self._decide(megamodel, def_, op, ctx, tracer)
                elif isinstance(op, MegamodelCall):
                    transition = self._execute_call(megamodel, def_, op, tracer, budget)
                else:  # pragma: no cover - exhaustive over operation kinds
                    raise _RunFault(ERR_BEHAVIOR, f"unknown operation kind {type(op).__name__}", megamodel, op.id)

                self._take(megamodel, transition, tracer)
                current = transition.target
        finally:
            ctx.active = False
            ctx.current = None

    def _execute_model_op(self, megamodel: str, def_: MegamodelDef, op: ModelOp, tracer: _Tracer) -> Transition:
        tracer.emit("op_enter", megamodel, op=op.id, detail=op.behavior_key)
        behavior = self._behaviors.get(op.behavior_key)
        if behavior is None:
            raise _RunFault(ERR_NO_BEHAVIOR, f"no behavior bound for key {op.behavior_key!r}", megamodel, op.id)
        accesses: dict[ElementId, ModelAccess] = {}
        for use in op.uses:
            decl = def_.model(use.model)
            if decl is None:
                raise _RunFault(ERR_UNKNOWN_ELEMENT, f"model {use.model!r} vanished", megamodel, op.id)
            accesses[use.model] = ModelAccess(self, megamodel, use, decl.payload_kind, decl.megamodel_ref)
        call = BehaviorCall(megamodel=megamodel, operation=op, now=self.clock.now(), _accesses=accesses)
        try:
            status = behavior(call)
        except MegamodelError as exc:
            raise _RunFault(exc.code, exc.message, megamodel, op.id) from exc
        except Exception as exc:
            raise _RunFault(ERR_BEHAVIOR, f"behavior {op.behavior_key!r} raised {exc!r}", megamodel, op.id) from exc
        if status not in op.statuses:
            raise _RunFault(
                ERR_BAD_STATUS,
                f"behavior {op.behavior_key!r} returned {status!r}, declared statuses are {list(op.statuses)}",
                megamodel,
                op.id,
            )
        tracer.emit("op_exit", megamodel, op=op.id, detail=status)
        return self._status_edge(megamodel, def_, op.id, status)

    def _decide(self, megamodel: str, def_: MegamodelDef, op: DecisionOp, ctx: ExecutionContext,
                tracer: _Tracer) -> Transition:
        def lookup(ref: condlang.TransitionRef) -> ExecutionInformation:
            transition = resolve_ref(def_, ref)  # raises LookupError for unknown refs
            return ctx.info.setdefault(transition.id, ExecutionInformation())

        default: Transition | None = None
        for t in def_.outgoing(op.id):
            if t.is_default:
                default = default or t
                continue
            if t.condition is None:
                continue
            try:
                if condlang.evaluate(t.condition, lookup, self.clock.now()):
                    return t
            except EvalError as exc:
                raise _RunFault(exc.code, exc.message, megamodel, op.id) from exc
        if default is None:
            raise _RunFault(ERR_BAD_STATUS, f"decision {op.id!r} has no default transition", megamodel, op.id)
        return default

    def _execute_call(self, megamodel: str, def_: MegamodelDef, op: MegamodelCall, tracer: _Tracer,
                      budget: list[int] | None) -> Transition:
        if op.callee not in self._defs:
            raise _RunFault(ERR_UNKNOWN_MEGAMODEL, f"callee {op.callee!r} is not registered", megamodel, op.id)
        tracer.emit("call_enter", megamodel, op=op.id, detail=op.callee)
        final = self._execute(op.callee, op.entry, tracer, budget)
        tracer.emit("call_exit", megamodel, op=op.id, detail=op.callee)
        status = op.final_mapping.get(final)
        if status is None:
            raise _RunFault(
                ERR_BAD_STATUS, f"callee final {final!r} has no mapping on {op.id!r}", megamodel, op.id
            )
        return self._status_edge(megamodel, def_, op.id, status)

    def _status_edge(self, megamodel: str, def_: MegamodelDef, op_id: ElementId, status: str) -> Transition:
        for t in def_.outgoing(op_id):
            if t.status == status:
                return t
        raise _RunFault(ERR_BAD_STATUS, f"no outgoing transition for status {status!r} on {op_id!r}", megamodel, op_id)

    def _take(self, megamodel: str, transition: Transition, tracer: _Tracer) -> None:
        ev = tracer.emit("transition_taken", megamodel, op=transition.source, detail=transition.id)
        ctx = self._contexts[megamodel]
        def_ = self._defs[megamodel]
        for sibling in def_.outgoing(transition.source):
            info = ctx.info.setdefault(sibling.id, ExecutionInformation())
            if sibling.id == transition.id:
                info.count = 0
                info.taken = True
                info.time = ev.clock
            else:
                info.count += 1

    # -- adaptation --

    def _emit_adaptation(self, megamodel: str, element: ElementId, description: str) -> None:
        if self._tracer is not None:
            self._tracer.emit("adaptation", megamodel, op=element, detail=description)
        else:
            ev = TraceEvent(len(self.adaptation_log), "adaptation", megamodel, element, description,
                            self.clock.tick())
            self.adaptation_log.append(ev)

    def adapt_replace_model(self, megamodel: str, model_id: ElementId, payload: Any) -> None:
        """Bind a new payload to a model; visible at the next model-use
        resolution, including later steps of a currently suspended run."""
        def_ = self.definition(megamodel)
        decl = def_.model(model_id)
        if decl is None:
            raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no model {model_id!r} in {megamodel!r}")
        if decl.payload_kind is PayloadKind.MEGAMODEL:
            raise MegamodelError(ERR_INVALID, f"model {model_id!r} is a megamodel binding, not a payload")
        diagnostics = validate(def_, self._defs)
        if diagnostics:  # pragma: no cover - registered definitions stay valid
            raise MegamodelError(ERR_INVALID, "definition no longer validates", diagnostics=diagnostics)
        self.repository.replace(decl.id, payload)
        self._emit_adaptation(megamodel, model_id, f"replace_model {model_id}")

    def adapt_set_condition(self, megamodel: str, transition_id: ElementId,
                            condition: condlang.Expr | str) -> None:
        if isinstance(condition, str):
            condition = condlang.parse_condition(condition)
        def_ = self.definition(megamodel)
        old = def_.transition(transition_id)
        if old is None:
            raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no transition {transition_id!r} in {megamodel!r}")
        self._apply_edits(megamodel, [SetCondition(transition_id, condition)])

    def adapt_rewire(self, megamodel: str, transition_id: ElementId, new_target: ElementId) -> ElementId:
        """Point a transition at a new target. The edge is re-keyed (ids are
        content-derived), so its bookkeeping starts fresh; returns the new id."""
        def_ = self.definition(megamodel)
        index = next((i for i, t in enumerate(def_.transitions) if t.id == transition_id), None)
        if index is None:
            raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no transition {transition_id!r} in {megamodel!r}")
        draft = self._apply_edits(megamodel, [Rewire(transition_id, new_target)])
        return draft.transitions[index].id

    def adapt_add_operation(self, megamodel: str, op: Operation, transitions: Sequence[Transition] = ()) -> None:
        self._apply_edits(megamodel, [AddOperation(op, tuple(transitions))])

    def adapt_remove_operation(self, megamodel: str, op_id: ElementId) -> None:
        self._apply_edits(megamodel, [RemoveOperation(op_id)])

    def adapt_batch(self, megamodel: str, edits: Sequence[Edit]) -> None:
        self._apply_edits(megamodel, list(edits))

    def _apply_edits(self, megamodel: str, edits: list[Edit]) -> MegamodelDef:
        """Apply, validate, then commit or roll back; emits one adaptation
        event per edit on commit. A failed batch leaves the definition,
        contexts, and repository untouched."""
        def_ = self.definition(megamodel)
        draft = copy.deepcopy(def_)
        touched: set[ElementId] = set()
        descriptions: list[tuple[ElementId, str]] = []

        for edit in edits:
            if isinstance(edit, SetCondition):
                t = draft.transition(edit.transition_id)
                if t is None:
                    raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no transition {edit.transition_id!r}")
                src = draft.operation(t.source)
                if not isinstance(src, DecisionOp):
                    raise MegamodelError(ERR_INVALID, f"transition {t.id!r} does not leave a decision")
                if t.is_default:
                    raise MegamodelError(ERR_INVALID, f"transition {t.id!r} is the default branch")
                for ref in condlang.refs_in(edit.condition):
                    try:
                        resolve_ref(draft, ref)
                    except LookupError as exc:
                        raise MegamodelError(ERR_UNRESOLVED_REF, str(exc)) from None
                if condlang.infer_type(edit.condition) != "bool":
                    raise MegamodelError(ERR_TYPE, "condition must be boolean")
                t.condition = edit.condition
                touched.add(t.source)
                descriptions.append((t.id, f"set_condition {t.id} := {condlang.to_text(edit.condition)}"))
            elif isinstance(edit, Rewire):
                t = draft.transition(edit.transition_id)
                if t is None:
                    raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no transition {edit.transition_id!r}")
                if draft.operation(edit.new_target) is None:
                    raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no operation {edit.new_target!r}")
                t.target = edit.new_target
                t.id = ""
                touched.add(t.source)
                descriptions.append((t.source, f"rewire {edit.transition_id} -> {edit.new_target}"))
            elif isinstance(edit, AddOperation):
                draft.operations.append(copy.deepcopy(edit.operation))
                for nt in edit.transitions:
                    draft.transitions.append(copy.deepcopy(nt))
                touched.add(edit.operation.id)
                descriptions.append((edit.operation.id, f"add_operation {edit.operation.id}"))
            elif isinstance(edit, RemoveOperation):
                op = draft.operation(edit.op_id)
                if op is None:
                    raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no operation {edit.op_id!r}")
                draft.operations.remove(op)
                draft.transitions = [t for t in draft.transitions
                                     if t.source != edit.op_id and t.target != edit.op_id]
                touched.add(edit.op_id)
                descriptions.append((edit.op_id, f"remove_operation {edit.op_id}"))
            elif isinstance(edit, AddTransition):
                draft.transitions.append(copy.deepcopy(edit.transition))
                touched.add(edit.transition.source)
                descriptions.append(
                    (edit.transition.source, f"add_transition {edit.transition.source} -> {edit.transition.target}")
                )
            elif isinstance(edit, RemoveTransition):
                t = draft.transition(edit.transition_id)
                if t is None:
                    raise MegamodelError(ERR_UNKNOWN_ELEMENT, f"no transition {edit.transition_id!r}")
                draft.transitions.remove(t)
                touched.add(t.source)
                descriptions.append((t.source, f"remove_transition {edit.transition_id}"))
            else:  # pragma: no cover
                raise MegamodelError(ERR_INVALID, f"unknown edit {edit!r}")

        for ctx in self._contexts.values():
            if ctx.active and ctx.current is not None and ctx.current in touched:
                raise MegamodelError(
                    ERR_ACTIVE_ELEMENT,
                    f"element {ctx.current!r} is currently executing in {ctx.megamodel!r}",
                )

        _derive_transition_ids(draft.transitions)

        registry = dict(self._defs)
        registry[megamodel] = draft
        diagnostics = validate(draft, registry)
        if diagnostics:
            raise MegamodelError(
                ERR_INVALID, "; ".join(str(d) for d in diagnostics[:5]), diagnostics=diagnostics
            )

        ctx = self._contexts[megamodel]
        ctx.info = {t.id: ctx.info.get(t.id, ExecutionInformation()) for t in draft.transitions}
        self._defs[megamodel] = draft
        for element, description in descriptions:
            self._emit_adaptation(megamodel, element, description)
        return draft
