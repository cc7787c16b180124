"""In-memory abstract syntax for megamodels and structural validation.

A megamodel describes one feedback loop (or a fragment of one) as a graph
of operations connected by status-labeled transitions, plus the models the
operations read, write, or annotate. Values are immutable by convention
once constructed; the interpreter's adaptation API is the only sanctioned
mutation path and works on copies that are swapped in atomically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping

from . import condlang
from .errors import (
    E_COND_FORBIDDEN,
    E_DANGLING_REF,
    E_DUP_ID,
    E_EMPTY_ID,
    E_FINAL_OUTGOING,
    E_INITIAL_INCOMING,
    E_INITIAL_OUTGOING,
    E_MULTI_DEFAULT,
    E_NO_CONDITION,
    E_NO_DEFAULT,
    E_NO_FINAL,
    E_NO_INITIAL,
    E_NO_OUTGOING,
    E_PAYLOAD_REF,
    E_STATUS_MISMATCH,
    E_TYPE,
    E_UNCOVERED_FINAL,
    E_UNMAPPED_FINAL,
    E_UNREACHABLE,
    E_UNRESOLVED_REF,
    ERR_CONDITION_REMAP,
    ERR_INVALID,
    ERR_RECURSIVE_CALL,
    Diagnostic,
    MegamodelError,
    ParseError,
    SourceSpan,
)

ElementId = str


class UseMode(str, Enum):
    READ = "reads"
    WRITE = "writes"
    ANNOTATE = "annotates"


class Role(str, Enum):
    """MAPE step a model operation belongs to; metadata only."""

    MONITOR = "Monitor"
    ANALYZE = "Analyze"
    PLAN = "Plan"
    EXECUTE = "Execute"
    OTHER = "Other"


class PayloadKind(str, Enum):
    OPAQUE = "opaque"
    MEGAMODEL = "megamodel"


@dataclass
class ModelDecl:
    """A model used by this megamodel's operations.

    ``stereotypes`` are free-form tags (ReflectionModel, ChangeModel, ...);
    they never affect validation or execution. A megamodel-kind model
    resolves to a registered megamodel and exposes it as a runtime payload.
    """

    id: ElementId
    name: str = ""
    stereotypes: tuple[str, ...] = ()
    payload_kind: PayloadKind = PayloadKind.OPAQUE
    megamodel_ref: str | None = None
    span: SourceSpan | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.name:
            self.name = self.id


@dataclass
class ModelUse:
    model: ElementId
    mode: UseMode


@dataclass
class Operation:
    id: ElementId
    name: str = ""
    span: SourceSpan | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.name:
            self.name = self.id


@dataclass
class InitialOp(Operation):
    pass


@dataclass
class FinalOp(Operation):
    pass


@dataclass
class DecisionOp(Operation):
    pass


@dataclass(kw_only=False)
class ModelOp(Operation):
    behavior_key: str = ""
    role: Role = Role.OTHER
    uses: tuple[ModelUse, ...] = ()
    statuses: tuple[str, ...] = ()


@dataclass
class MegamodelCall(Operation):
    """Complex operation: synchronously runs another megamodel.

    ``final_mapping`` maps callee final-operation ids to this operation's
    outgoing status labels.
    """

    callee: str = ""
    entry: str = ""
    final_mapping: dict[str, str] = field(default_factory=dict)

    @property
    def statuses(self) -> tuple[str, ...]:
        return tuple(self.final_mapping.values())


@dataclass
class Transition:
    """Control-flow edge. ``status`` labels edges out of status-bearing
    operations; ``condition``/``is_default`` apply to decision sources only.

    An empty id is auto-derived from content when the owning megamodel is
    constructed, so textual round trips are id-stable.
    """

    source: ElementId
    target: ElementId
    status: str | None = None
    condition: condlang.Expr | None = None
    is_default: bool = False
    id: ElementId = ""
    span: SourceSpan | None = field(default=None, repr=False, compare=False)


def _derive_transition_ids(transitions: list[Transition]) -> None:
    used = {t.id for t in transitions if t.id}
    cond_counters: dict[str, itertools.count] = {}
    for t in transitions:
        if t.id:
            continue
        if t.status is not None:
            label = t.status
        elif t.is_default:
            label = "else"
        elif t.condition is not None:
            n = next(cond_counters.setdefault(t.source, itertools.count()))
            label = f"if{n}"
        else:
            label = "to"
        base = f"{t.source}__{label}__{t.target}"
        candidate, n = base, 2
        while candidate in used:
            candidate = f"{base}_{n}"
            n += 1
        used.add(candidate)
        t.id = candidate


@dataclass
class MegamodelDef:
    """One megamodel: models, operations, and the transitions between them."""

    name: str
    models: list[ModelDecl] = field(default_factory=list)
    operations: list[Operation] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    span: SourceSpan | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        _derive_transition_ids(self.transitions)

    # -- lookup helpers (linear scans; megamodels are small) --

    def model(self, model_id: ElementId) -> ModelDecl | None:
        for m in self.models:
            if m.id == model_id:
                return m
        return None

    def operation(self, op_id: ElementId) -> Operation | None:
        for o in self.operations:
            if o.id == op_id:
                return o
        return None

    def transition(self, transition_id: ElementId) -> Transition | None:
        for t in self.transitions:
            if t.id == transition_id:
                return t
        return None

    def outgoing(self, op_id: ElementId) -> list[Transition]:
        return [t for t in self.transitions if t.source == op_id]

    def incoming(self, op_id: ElementId) -> list[Transition]:
        return [t for t in self.transitions if t.target == op_id]

    def initials(self) -> list[InitialOp]:
        return [o for o in self.operations if isinstance(o, InitialOp)]

    def finals(self) -> list[FinalOp]:
        return [o for o in self.operations if isinstance(o, FinalOp)]

    def calls(self) -> list[MegamodelCall]:
        return [o for o in self.operations if isinstance(o, MegamodelCall)]


def resolve_ref(def_: MegamodelDef, ref: condlang.TransitionRef) -> Transition:
    """Resolve a condition's transition reference within ``def_``.

    Raises ``LookupError`` when the ref is unknown or ambiguous.
    """
    op = def_.operation(ref.operation)
    if op is None:
        raise LookupError(f"unknown operation {ref.operation!r}")
    outs = def_.outgoing(op.id)
    if isinstance(op, (ModelOp, MegamodelCall)):
        matches = [t for t in outs if t.status == ref.label]
    else:
        matches = [t for t in outs if t.target == ref.label]
    if len(matches) != 1:
        kind = "ambiguous" if matches else "unmatched"
        raise LookupError(f"{kind} transition reference {ref}")
    return matches[0]


# --- validation ---

ValidationReport = list


def validate(def_: MegamodelDef, registry: Mapping[str, MegamodelDef]) -> list[Diagnostic]:
    """Check every structural invariant; problems come back as diagnostics.

    Pure and deterministic: identical inputs yield identical reports. An
    empty report means the megamodel is well-formed and all cross-megamodel
    references resolve in ``registry``.
    """
    out: list[Diagnostic] = []
    mm = def_.name

    def bad(code: str, element: ElementId, message: str) -> None:
        out.append(Diagnostic(code, mm, element, message))

    if not mm:
        bad(E_EMPTY_ID, "<megamodel>", "megamodel name must be non-empty")

    seen: set[ElementId] = set()
    for element_id, what in itertools.chain(
        ((m.id, "model") for m in def_.models),
        ((o.id, "operation") for o in def_.operations),
        ((t.id, "transition") for t in def_.transitions),
    ):
        if not element_id:
            bad(E_EMPTY_ID, "<anonymous>", f"{what} id must be non-empty")
        elif element_id in seen:
            bad(E_DUP_ID, element_id, f"duplicate element id {element_id!r}")
        else:
            seen.add(element_id)

    ops = {o.id: o for o in def_.operations}
    model_ids = {m.id for m in def_.models}

    for m in def_.models:
        has_ref = m.megamodel_ref is not None
        if (m.payload_kind is PayloadKind.MEGAMODEL) != has_ref:
            bad(
                E_PAYLOAD_REF,
                m.id,
                "megamodel-kind models need a megamodel reference and opaque models must not have one",
            )
        elif has_ref and m.megamodel_ref not in registry:
            bad(E_DANGLING_REF, m.id, f"references unknown megamodel {m.megamodel_ref!r}")

    initials = def_.initials()
    finals = def_.finals()
    if not initials:
        bad(E_NO_INITIAL, mm, "megamodel needs at least one initial operation")
    if not finals:
        bad(E_NO_FINAL, mm, "megamodel needs at least one final operation")

    for o in def_.operations:
        if isinstance(o, ModelOp):
            if not o.statuses:
                bad(E_STATUS_MISMATCH, o.id, "operation declares no return statuses")
            elif len(set(o.statuses)) != len(o.statuses):
                bad(E_STATUS_MISMATCH, o.id, "declared statuses must be distinct")
            for use in o.uses:
                if use.model not in model_ids:
                    bad(E_DANGLING_REF, o.id, f"uses unknown model {use.model!r}")
        elif isinstance(o, MegamodelCall):
            callee = registry.get(o.callee)
            if callee is None:
                bad(E_DANGLING_REF, o.id, f"calls unknown megamodel {o.callee!r}")
                continue
            entry = callee.operation(o.entry)
            if not isinstance(entry, InitialOp):
                bad(
                    E_DANGLING_REF,
                    o.id,
                    f"entry {o.entry!r} is not an initial operation of {o.callee!r}",
                )
            callee_finals = {f.id for f in callee.finals()}
            for key in o.final_mapping:
                if key not in callee_finals:
                    bad(E_UNMAPPED_FINAL, o.id, f"maps {key!r}, not a final of {o.callee!r}")
            for final_id in sorted(callee_finals - set(o.final_mapping)):
                bad(E_UNCOVERED_FINAL, o.id, f"final {final_id!r} of {o.callee!r} has no mapping")
            values = list(o.final_mapping.values())
            if len(set(values)) != len(values):
                bad(E_STATUS_MISMATCH, o.id, "final mapping labels must be distinct")

    for t in def_.transitions:
        src = ops.get(t.source)
        tgt = ops.get(t.target)
        if src is None:
            bad(E_DANGLING_REF, t.id, f"source {t.source!r} is not an operation")
        if tgt is None:
            bad(E_DANGLING_REF, t.id, f"target {t.target!r} is not an operation")
        if src is None or tgt is None:
            continue
        takes_status = isinstance(src, (ModelOp, MegamodelCall))
        if takes_status and t.status is None:
            bad(E_STATUS_MISMATCH, t.id, "transition from a status-bearing operation needs a status")
        if not takes_status and t.status is not None:
            bad(E_STATUS_MISMATCH, t.id, f"source kind takes no status, got {t.status!r}")
        if not isinstance(src, DecisionOp):
            if t.condition is not None:
                bad(E_COND_FORBIDDEN, t.id, "conditions are allowed only on decision transitions")
            if t.is_default:
                bad(E_COND_FORBIDDEN, t.id, "default flag is allowed only on decision transitions")
        elif t.is_default and t.condition is not None:
            bad(E_COND_FORBIDDEN, t.id, "the default transition must not carry a condition")

    for o in def_.operations:
        outs = def_.outgoing(o.id)
        if isinstance(o, FinalOp):
            for t in outs:
                bad(E_FINAL_OUTGOING, t.id, "final operations have no outgoing transitions")
            continue
        if isinstance(o, InitialOp):
            if len(outs) != 1:
                bad(E_INITIAL_OUTGOING, o.id, f"initial needs exactly one outgoing transition, has {len(outs)}")
            for t in def_.incoming(o.id):
                bad(E_INITIAL_INCOMING, t.id, "initial operations have no incoming transitions")
            continue
        if not outs:
            bad(E_NO_OUTGOING, o.id, "non-final operation needs at least one outgoing transition")
            continue
        if isinstance(o, (ModelOp, MegamodelCall)):
            declared = list(o.statuses)
            labels = [t.status for t in outs if t.status is not None]
            if len(set(labels)) != len(labels):
                bad(E_STATUS_MISMATCH, o.id, "outgoing status labels must be distinct")
            elif set(labels) != set(declared):
                missing = sorted(set(declared) - set(labels))
                unknown = sorted(set(labels) - set(declared))
                parts = []
                if missing:
                    parts.append(f"missing {missing}")
                if unknown:
                    parts.append(f"unknown {unknown}")
                bad(E_STATUS_MISMATCH, o.id, f"outgoing transitions must cover statuses exactly: {', '.join(parts)}")
        if isinstance(o, DecisionOp):
            defaults = [t for t in outs if t.is_default]
            if not defaults:
                bad(E_NO_DEFAULT, o.id, "decision needs exactly one default transition")
            elif len(defaults) > 1:
                bad(E_MULTI_DEFAULT, o.id, f"decision has {len(defaults)} default transitions")
            for t in outs:
                if not t.is_default and t.condition is None:
                    bad(E_NO_CONDITION, t.id, "decision transition needs a condition or must be the default")

    for t in def_.transitions:
        src = ops.get(t.source)
        if t.condition is None or not isinstance(src, DecisionOp) or t.is_default:
            continue
        for ref in condlang.refs_in(t.condition):
            try:
                resolve_ref(def_, ref)
            except LookupError as exc:
                bad(E_UNRESOLVED_REF, t.id, str(exc))
        try:
            if condlang.infer_type(t.condition) != "bool":
                bad(E_TYPE, t.id, "condition must be boolean")
        except ParseError as exc:
            bad(E_TYPE, t.id, exc.message)

    if initials:
        reachable: set[ElementId] = set()
        frontier = [o.id for o in initials]
        by_source: dict[ElementId, list[Transition]] = {}
        for t in def_.transitions:
            by_source.setdefault(t.source, []).append(t)
        while frontier:
            cur = frontier.pop()
            if cur in reachable:
                continue
            reachable.add(cur)
            for t in by_source.get(cur, ()):
                if t.target in ops and t.target not in reachable:
                    frontier.append(t.target)
        for o in def_.operations:
            if not isinstance(o, InitialOp) and o.id not in reachable:
                bad(E_UNREACHABLE, o.id, "operation is not reachable from any initial")

    return out


# --- structural equality ---


def _canon_operation(o: Operation) -> tuple:
    if isinstance(o, InitialOp):
        return ("initial", o.id, o.name)
    if isinstance(o, FinalOp):
        return ("final", o.id, o.name)
    if isinstance(o, DecisionOp):
        return ("decision", o.id, o.name)
    if isinstance(o, ModelOp):
        return (
            "op",
            o.id,
            o.name,
            o.behavior_key,
            o.role.value,
            tuple(sorted((u.model, u.mode.value) for u in o.uses)),
            tuple(sorted(o.statuses)),
        )
    if isinstance(o, MegamodelCall):
        return ("call", o.id, o.name, o.callee, o.entry, tuple(sorted(o.final_mapping.items())))
    raise TypeError(f"unknown operation kind: {o!r}")


def canonical_form(def_: MegamodelDef) -> tuple:
    """Order-insensitive content key; the megamodel's own name is excluded."""
    models = tuple(
        sorted(
            (m.id, m.name, tuple(sorted(m.stereotypes)), m.payload_kind.value, m.megamodel_ref or "")
            for m in def_.models
        )
    )
    ops = tuple(sorted(_canon_operation(o) for o in def_.operations))
    transitions = tuple(
        sorted(
            (
                t.id,
                t.source,
                t.target,
                t.status or "",
                condlang.to_text(t.condition) if t.condition is not None else "",
                t.is_default,
            )
            for t in def_.transitions
        )
    )
    return (models, ops, transitions)


def structural_equals(a: MegamodelDef, b: MegamodelDef) -> bool:
    """True iff the two megamodels are isomorphic under element ids.

    List order is irrelevant except where it is semantic (the evaluation
    order of a decision's conditions is part of derived transition ids).
    The megamodels' own names are not compared.
    """
    return canonical_form(a) == canonical_form(b)


# --- inlining of megamodel calls ---


def _call_cycle(start: str, registry: Mapping[str, MegamodelDef]) -> list[str] | None:
    """Return a call chain forming a cycle reachable from ``start``, if any."""
    path: list[str] = []
    on_path: set[str] = set()
    done: set[str] = set()

    def visit(name: str) -> list[str] | None:
        if name in on_path:
            return path[path.index(name) :] + [name]
        if name in done or name not in registry:
            return None
        on_path.add(name)
        path.append(name)
        for call in registry[name].calls():
            cycle = visit(call.callee)
            if cycle:
                return cycle
        path.pop()
        on_path.discard(name)
        done.add(name)
        return None

    return visit(start)


def _fresh_id(base: str, prefix: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    candidate = f"{prefix}_{base}"
    n = 2
    while candidate in taken:
        candidate = f"{prefix}_{base}_{n}"
        n += 1
    return candidate


def _inline_one(caller: MegamodelDef, call: MegamodelCall, registry: Mapping[str, MegamodelDef]) -> MegamodelDef:
    callee = registry[call.callee]
    exit_edges = {t.status: t for t in caller.outgoing(call.id)}

    taken_ids = {m.id for m in caller.models} | {o.id for o in caller.operations}
    taken_ids.discard(call.id)

    # Models with the same name denote the same runtime payload and merge.
    id_map: dict[ElementId, ElementId] = {}
    new_models = list(caller.models)
    by_name = {m.name: m for m in caller.models}
    for m in callee.models:
        existing = by_name.get(m.name)
        if existing is not None:
            id_map[m.id] = existing.id
            continue
        fresh = _fresh_id(m.id, callee.name, taken_ids)
        taken_ids.add(fresh)
        id_map[m.id] = fresh
        new_models.append(replace(m, id=fresh))

    mapped_finals = set(call.final_mapping)
    dropped = {call.entry} | mapped_finals
    new_ops: list[Operation] = [o for o in caller.operations if o.id != call.id]
    for o in callee.operations:
        if o.id in dropped:
            continue
        fresh = _fresh_id(o.id, callee.name, taken_ids)
        taken_ids.add(fresh)
        id_map[o.id] = fresh
        copied = replace(o, id=fresh)
        if isinstance(copied, ModelOp):
            copied.uses = tuple(ModelUse(id_map[u.model], u.mode) for u in o.uses)
        new_ops.append(copied)

    entry_out = callee.outgoing(call.entry)
    if not entry_out:
        raise MegamodelError(ERR_INVALID, f"entry {call.entry!r} of {callee.name!r} has no successor")
    entry_succ = entry_out[0].target

    def landing(callee_target: ElementId, _seen: frozenset = frozenset()) -> ElementId:
        """Where an edge into ``callee_target`` ends up after the splice."""
        if callee_target not in mapped_finals:
            return id_map[callee_target]
        if callee_target in _seen:
            raise MegamodelError(ERR_INVALID, f"degenerate call loop through {callee_target!r}")
        external = exit_edges[call.final_mapping[callee_target]].target
        if external == call.id:
            return landing(entry_succ, _seen | {callee_target})
        return external

    # Where each old transition ended up, keyed per owning megamodel, so
    # condition references can be rewritten afterwards.
    image: dict[tuple[str, ElementId], Transition] = {}
    rewritten: list[tuple[Transition, MegamodelDef, str]] = []
    new_transitions: list[Transition] = []

    for t in caller.transitions:
        if t.source == call.id:
            continue  # the call's exit edges are absorbed into the splice
        if t.target == call.id:
            nt = replace(t, target=landing(entry_succ), id="")
        else:
            nt = replace(t)
        image[("caller", t.id)] = nt
        rewritten.append((nt, caller, "caller"))
        new_transitions.append(nt)

    for t in callee.transitions:
        if t.source == call.entry:
            continue
        nt = replace(t, source=id_map[t.source], target=landing(t.target), id="")
        image[("callee", t.id)] = nt
        rewritten.append((nt, callee, "callee"))
        new_transitions.append(nt)

    ops_by_id = {o.id: o for o in new_ops}

    def remap_ref(owner: MegamodelDef, tag: str, ref: condlang.TransitionRef) -> condlang.TransitionRef:
        if owner is caller and ref.operation == call.id:
            # The call disappears; the ref moves to the unique callee edge
            # that fed the mapped final and now carries this exit's bookkeeping.
            final_ids = [f for f, s in call.final_mapping.items() if s == ref.label]
            feeders = [
                kt
                for f in final_ids
                for kt in callee.transitions
                if kt.target == f and kt.source != call.entry
            ]
            if len(feeders) != 1:
                raise MegamodelError(
                    ERR_CONDITION_REMAP,
                    f"cannot rewrite condition reference {ref}: "
                    f"{len(feeders)} callee transitions feed that exit",
                )
            nt = image[("callee", feeders[0].id)]
        else:
            try:
                old = resolve_ref(owner, ref)
            except LookupError as exc:
                raise MegamodelError(ERR_CONDITION_REMAP, str(exc)) from None
            nt = image[(tag, old.id)]
        src_op = ops_by_id[nt.source]
        if isinstance(src_op, (ModelOp, MegamodelCall)):
            return condlang.TransitionRef(nt.source, nt.status or "")
        return condlang.TransitionRef(nt.source, nt.target)

    for nt, owner, tag in rewritten:
        if nt.condition is not None:
            nt.condition = condlang.map_refs(nt.condition, lambda r: remap_ref(owner, tag, r))

    return MegamodelDef(name=caller.name, models=new_models, operations=new_ops, transitions=new_transitions)


def inline(def_: MegamodelDef, registry: Mapping[str, MegamodelDef]) -> MegamodelDef:
    """Expand every megamodel call into a copy of the callee's graph.

    The result is behaviorally equivalent for operation-level traces and
    validates whenever the input does. Raises ``ERR_RECURSIVE_CALL`` when
    the call graph reachable from ``def_`` contains a cycle.
    """
    cycle = _call_cycle(def_.name, registry)
    if cycle:
        raise MegamodelError(ERR_RECURSIVE_CALL, "recursive megamodel calls: " + " -> ".join(cycle))
    current = def_
    while True:
        calls = current.calls()
        if not calls:
            return current
        reg = dict(registry)
        reg[current.name] = current
        current = _inline_one(current, calls[0], reg)
