"""Shared test helpers: seeded random megamodels, deterministic scripted
behaviors, and a brute-force replay oracle for transition bookkeeping.

The oracle recomputes count/time/taken for every transition purely from
the transition-taken events of a trace and the megamodel's edge lists; it
shares no state with the interpreter.
"""

from __future__ import annotations

import random
import zlib
from typing import Iterable, Mapping

from megamodels.condlang import (
    Arith,
    BoolLit,
    BoolOp,
    Cmp,
    Count,
    Expr,
    IntLit,
    Not,
    Now,
    Taken,
    Time,
    TransitionRef,
)
from megamodels.interpreter import RuntimeEnvironment, TraceEvent
from megamodels.metamodel import (
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
)

_STATUS_POOL = ("ok", "fail", "retry")


def _random_condition(rng: random.Random, refs: list[TransitionRef], depth: int = 0) -> Expr:
    if not refs:
        return BoolLit(True)
    ref = rng.choice(refs)
    choice = rng.randrange(6 if depth < 2 else 4)
    if choice == 0:
        return Cmp(rng.choice(("<", "<=", ">", ">=", "==", "!=")), Count(ref), IntLit(rng.randrange(0, 7)))
    if choice == 1:
        return Taken(ref)
    if choice == 2:
        return Cmp(rng.choice((">", ">=")), Arith("-", Now(), Time(ref)), IntLit(rng.randrange(0, 50)))
    if choice == 3:
        return BoolLit(rng.random() < 0.5)
    if choice == 4:
        return Not(_random_condition(rng, refs, depth + 1))
    return BoolOp(
        rng.choice(("and", "or")),
        _random_condition(rng, refs, depth + 1),
        _random_condition(rng, refs, depth + 1),
    )


def random_megamodel(rng: random.Random, name: str = "Rand", max_ops: int = 8) -> MegamodelDef:
    """A random valid megamodel with at most ``max_ops`` operations.

    Reachability is guaranteed by construction: the non-initial operations
    form a spine ending in a final, and every extra edge points somewhere
    on it.
    """
    n_initial = rng.choice((1, 1, 2))
    n_final = rng.choice((1, 1, 2))
    budget = max_ops - n_initial - n_final
    n_model = rng.randint(1, max(1, min(4, budget - 1)))
    n_decision = rng.randint(0, max(0, min(2, budget - n_model)))

    models = [ModelDecl(f"M{i}") for i in range(rng.randint(0, 2))]
    initials = [InitialOp(f"I{i}") for i in range(n_initial)]
    finals = [FinalOp(f"F{i}") for i in range(n_final)]
    model_ops: list[ModelOp] = []
    for i in range(n_model):
        k = rng.randint(1, 3) if not (n_final == 2 and i == 0) else rng.randint(2, 3)
        statuses = _STATUS_POOL[:k]
        uses = tuple(
            ModelUse(m.id, rng.choice(list(UseMode))) for m in rng.sample(models, k=rng.randint(0, len(models)))
        )
        model_ops.append(
            ModelOp(f"A{i}", behavior_key=f"beh_{name}_A{i}", role=rng.choice(list(Role)), uses=uses,
                    statuses=statuses)
        )
    decisions = [DecisionOp(f"D{i}") for i in range(n_decision)]

    mid: list[Operation] = [*model_ops, *decisions]
    rng.shuffle(mid)
    spine: list[Operation] = [*mid, finals[0]]
    mid_and_finals: list[Operation] = [*mid, *finals]

    transitions: list[Transition] = []
    transitions.append(Transition(initials[0].id, spine[0].id))
    for extra in initials[1:]:
        transitions.append(Transition(extra.id, rng.choice(spine).id))

    forced_second_final = n_final == 2
    for i, op in enumerate(mid):
        next_hop = spine[i + 1]
        if isinstance(op, ModelOp):
            statuses = list(op.statuses)
            transitions.append(Transition(op.id, next_hop.id, status=statuses[0]))
            for j, status in enumerate(statuses[1:], start=1):
                if forced_second_final and j == 1 and len(statuses) > 1:
                    target: Operation = finals[1]
                    forced_second_final = False
                else:
                    target = rng.choice(mid_and_finals)
                transitions.append(Transition(op.id, target.id, status=status))
        else:
            for _ in range(rng.randint(0, 2)):
                transitions.append(Transition(op.id, rng.choice(mid_and_finals).id, condition=BoolLit(True)))
            transitions.append(Transition(op.id, next_hop.id, is_default=True))

    def_ = MegamodelDef(
        name=name,
        models=models,
        operations=[*initials, *finals, *mid],
        transitions=transitions,
    )

    # Now that edges exist, replace placeholder conditions with real ones.
    refs = [TransitionRef(op.id, status) for op in model_ops for status in op.statuses]
    for t in def_.transitions:
        if t.condition is not None:
            t.condition = _random_condition(rng, refs)
    return def_


def random_megamodel_with_call(rng: random.Random, name: str = "Caller") -> list[MegamodelDef]:
    """A (callee, caller) pair where the caller invokes the callee once and
    also references it as a megamodel-kind model."""
    callee = random_megamodel(rng, name=f"{name}Callee", max_ops=6)
    entry = callee.initials()[0].id
    mapping = {f.id: f"exit{i}" for i, f in enumerate(callee.finals())}

    caller_models = [
        ModelDecl("Reflected", payload_kind=PayloadKind.MEGAMODEL, megamodel_ref=callee.name),
    ]
    call = MegamodelCall("Sub", callee=callee.name, entry=entry, final_mapping=mapping)
    work = ModelOp("Work", behavior_key=f"beh_{name}_Work", statuses=("ok",),
                   uses=(ModelUse("Reflected", UseMode.READ),))
    ops: list[Operation] = [InitialOp("I0"), FinalOp("F0"), work, call]
    transitions = [
        Transition("I0", "Work"),
        Transition("Work", "Sub", status="ok"),
        *[Transition("Sub", "F0", status=label) for label in mapping.values()],
    ]
    caller = MegamodelDef(name=name, models=caller_models, operations=ops, transitions=transitions)
    return [callee, caller]


def scripted_status(seed: int, key: str, index: int, statuses: tuple[str, ...]) -> str:
    """Deterministic status choice independent of interleaving."""
    digest = zlib.crc32(f"{seed}:{key}:{index}".encode())
    return statuses[digest % len(statuses)]


def bind_scripted_behaviors(env: RuntimeEnvironment, defs: Iterable[MegamodelDef], seed: int) -> None:
    counters: dict[str, int] = {}

    def make(key: str, statuses: tuple[str, ...]):
        def behavior(call) -> str:
            index = counters.get(key, 0)
            counters[key] = index + 1
            return scripted_status(seed, key, index, statuses)

        return behavior

    for def_ in defs:
        for op in def_.operations:
            if isinstance(op, ModelOp):
                env.bind_behavior(op.behavior_key, make(op.behavior_key, tuple(op.statuses)))


def replay_bookkeeping(
    defs: Mapping[str, MegamodelDef], traces: Iterable[Iterable[TraceEvent]]
) -> dict[str, dict[str, tuple[int, int, bool]]]:
    """Recompute (count, time, taken) per transition from trace events only."""
    outgoing: dict[str, dict[str, list]] = {}
    state: dict[str, dict[str, list]] = {}
    for name, def_ in defs.items():
        by_source: dict[str, list] = {}
        for t in def_.transitions:
            by_source.setdefault(t.source, []).append(t.id)
        outgoing[name] = by_source
        state[name] = {t.id: [0, 0, False] for t in def_.transitions}

    for trace in traces:
        for ev in trace:
            if ev.kind != "transition_taken":
                continue
            taken_id = ev.detail
            for sibling in outgoing[ev.megamodel].get(ev.op, []):
                cell = state[ev.megamodel].setdefault(sibling, [0, 0, False])
                if sibling == taken_id:
                    cell[0] = 0
                    cell[1] = ev.clock
                    cell[2] = True
                else:
                    cell[0] += 1
    return {
        name: {tid: (c[0], c[1], c[2]) for tid, c in cells.items()} for name, cells in state.items()
    }


def op_level_trace(trace: Iterable[TraceEvent]) -> list[tuple[str, str]]:
    """(behavior key, exit status) pairs, with call framing erased."""
    keys = [ev.detail for ev in trace if ev.kind == "op_enter"]
    statuses = [ev.detail for ev in trace if ev.kind == "op_exit"]
    return list(zip(keys, statuses))
