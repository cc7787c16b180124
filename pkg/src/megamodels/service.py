"""HTTP service wrapping the megamodel engine.

One service process owns one runtime environment plus the mock managed
system, so registered megamodels stay alive between requests: counts and
timestamps accumulate across runs and adaptations apply to the live
definitions, which is the natural deployment for an engine whose whole
point is long-running feedback loops.

Runs are serialized with a lock; a request that would re-enter a running
engine gets 409.
"""

from __future__ import annotations

import threading
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import harness, textio
from .errors import (
    ERR_ACTIVE_ELEMENT,
    ERR_DUPLICATE_NAME,
    ERR_REENTRANT,
    ERR_UNKNOWN_ELEMENT,
    ERR_UNKNOWN_MEGAMODEL,
    MegamodelError,
    ParseError,
)
from .interpreter import RuntimeEnvironment, TraceEvent
from .metamodel import validate

_HTTP_STATUS = {
    ERR_DUPLICATE_NAME: 409,
    ERR_REENTRANT: 409,
    ERR_ACTIVE_ELEMENT: 409,
    ERR_UNKNOWN_MEGAMODEL: 404,
    ERR_UNKNOWN_ELEMENT: 404,
}


class MegamodelSource(BaseModel):
    source: str = Field(description="One or more megamodel blocks in .mm syntax")


class DiagnosticOut(BaseModel):
    code: str
    megamodel: str
    element: str
    message: str


class ValidateResponse(BaseModel):
    valid: bool
    diagnostics: list[DiagnosticOut]


class RegisterResponse(BaseModel):
    registered: list[str]


class MegamodelSummary(BaseModel):
    name: str
    models: int
    operations: int
    transitions: int


class TransitionInfoOut(BaseModel):
    count: int
    time: int
    taken: bool


class ContextResponse(BaseModel):
    megamodel: str
    active: bool
    current: str | None
    info: dict[str, TransitionInfoOut]


class MegamodelDetail(BaseModel):
    name: str
    source: str
    context: ContextResponse


class RunRequest(BaseModel):
    entry: str
    runs: int = Field(default=1, ge=1)
    max_steps: int | None = Field(default=100_000, ge=1)


class TraceEventOut(BaseModel):
    seq: int
    kind: str
    megamodel: str
    op: str | None
    status: str | None
    clock: int


class RunOutcome(BaseModel):
    final: str | None
    fault: str | None
    events: list[TraceEventOut]


class RunResponse(BaseModel):
    megamodel: str
    runs: list[RunOutcome]


class AdaptationRequest(BaseModel):
    action: str = Field(description="replace_model | set_condition | rewire | remove_operation")
    model_id: str | None = None
    payload: Any = None
    transition_id: str | None = None
    condition: str | None = None
    new_target: str | None = None
    op_id: str | None = None


class EventRequest(BaseModel):
    events: list[dict[str, Any]] = Field(description="Scripted events, applied immediately")


class ResetRequest(BaseModel):
    clock: str = Field(default="wall", pattern="^(wall|logical)$")
    seed: int = 0
    inadequate_after: int = 3


def _event_out(ev: TraceEvent) -> TraceEventOut:
    return TraceEventOut(seq=ev.seq, kind=ev.kind, megamodel=ev.megamodel, op=ev.op, status=ev.detail, clock=ev.clock)


def _error(exc: MegamodelError) -> HTTPException:
    detail: dict[str, Any] = {"code": exc.code, "message": exc.message}
    if exc.diagnostics:
        detail["diagnostics"] = [
            {"code": d.code, "megamodel": d.megamodel, "element": d.element, "message": d.message}
            for d in exc.diagnostics
        ]
    return HTTPException(status_code=_HTTP_STATUS.get(exc.code, 422), detail=detail)


class ServiceState:
    def __init__(self, clock: str = "wall", seed: int = 0, inadequate_after: int = 3):
        self.lock = threading.Lock()
        self.reset(clock=clock, seed=seed, inadequate_after=inadequate_after)

    def reset(self, clock: str = "wall", seed: int = 0, inadequate_after: int = 3) -> None:
        self.env, self.mock = harness.build_runtime(clock=clock, seed=seed, inadequate_after=inadequate_after)


def create_app(state: ServiceState | None = None) -> FastAPI:
    app = FastAPI(title="megamodels", description="Executable megamodel engine", version="0.1.0")
    svc = state or ServiceState()

    def env() -> RuntimeEnvironment:
        return svc.env

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/validate", response_model=ValidateResponse)
    def validate_source(body: MegamodelSource) -> ValidateResponse:
        try:
            defs = textio.parse_megamodel(body.source, "<request>")
        except ParseError as exc:
            raise HTTPException(status_code=422, detail={"code": exc.code, "message": exc.message}) from None
        registry = {d.name: d for d in defs}
        for name in env().names():
            registry.setdefault(name, env().definition(name))
        diagnostics = [d for def_ in defs for d in validate(def_, registry)]
        return ValidateResponse(
            valid=not diagnostics,
            diagnostics=[
                DiagnosticOut(code=d.code, megamodel=d.megamodel, element=d.element, message=d.message)
                for d in diagnostics
            ],
        )

    @app.post("/megamodels", response_model=RegisterResponse, status_code=201)
    def register(body: MegamodelSource) -> RegisterResponse:
        try:
            defs = textio.parse_megamodel(body.source, "<request>")
        except ParseError as exc:
            raise HTTPException(status_code=422, detail={"code": exc.code, "message": exc.message}) from None
        with svc.lock:
            try:
                env().register_all(defs)
            except MegamodelError as exc:
                raise _error(exc) from None
        return RegisterResponse(registered=[d.name for d in defs])

    @app.get("/megamodels", response_model=list[MegamodelSummary])
    def list_megamodels() -> list[MegamodelSummary]:
        out = []
        for name in env().names():
            def_ = env().definition(name)
            out.append(
                MegamodelSummary(
                    name=name,
                    models=len(def_.models),
                    operations=len(def_.operations),
                    transitions=len(def_.transitions),
                )
            )
        return out

    def _context_response(name: str) -> ContextResponse:
        ctx = env().context(name)
        return ContextResponse(
            megamodel=name,
            active=ctx.active,
            current=ctx.current,
            info={
                tid: TransitionInfoOut(count=i.count, time=i.time, taken=i.taken)
                for tid, i in sorted(ctx.info.items())
            },
        )

    @app.get("/megamodels/{name}", response_model=MegamodelDetail)
    def get_megamodel(name: str) -> MegamodelDetail:
        try:
            def_ = env().definition(name)
        except MegamodelError as exc:
            raise _error(exc) from None
        return MegamodelDetail(name=name, source=textio.serialize(def_), context=_context_response(name))

    @app.get("/megamodels/{name}/context", response_model=ContextResponse)
    def get_context(name: str) -> ContextResponse:
        try:
            return _context_response(name)
        except MegamodelError as exc:
            raise _error(exc) from None

    @app.post("/megamodels/{name}/runs", response_model=RunResponse)
    def run(name: str, body: RunRequest) -> RunResponse:
        if not svc.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail={"code": ERR_REENTRANT, "message": "a run is in progress"})
        try:
            outcomes = []
            for _ in range(body.runs):
                try:
                    result = env().run(name, body.entry, max_steps=body.max_steps)
                except MegamodelError as exc:
                    raise _error(exc) from None
                outcomes.append(
                    RunOutcome(
                        final=result.final,
                        fault=result.fault,
                        events=[_event_out(ev) for ev in result.trace],
                    )
                )
            return RunResponse(megamodel=name, runs=outcomes)
        finally:
            svc.lock.release()

    @app.post("/megamodels/{name}/adaptations", response_model=ContextResponse)
    def adapt(name: str, body: AdaptationRequest) -> ContextResponse:
        with svc.lock:
            try:
                if body.action == "replace_model":
                    if body.model_id is None:
                        raise HTTPException(status_code=422, detail="model_id is required")
                    env().adapt_replace_model(name, body.model_id, body.payload)
                elif body.action == "set_condition":
                    if body.transition_id is None or body.condition is None:
                        raise HTTPException(status_code=422, detail="transition_id and condition are required")
                    env().adapt_set_condition(name, body.transition_id, body.condition)
                elif body.action == "rewire":
                    if body.transition_id is None or body.new_target is None:
                        raise HTTPException(status_code=422, detail="transition_id and new_target are required")
                    env().adapt_rewire(name, body.transition_id, body.new_target)
                elif body.action == "remove_operation":
                    if body.op_id is None:
                        raise HTTPException(status_code=422, detail="op_id is required")
                    env().adapt_remove_operation(name, body.op_id)
                else:
                    raise HTTPException(status_code=422, detail=f"unknown action {body.action!r}")
            except MegamodelError as exc:
                raise _error(exc) from None
        return _context_response(name)

    @app.post("/events")
    def inject_events(body: EventRequest) -> dict[str, int]:
        script = harness.load_script([{"at_run": 1, "event": ev} for ev in body.events])
        with svc.lock:
            harness.apply_script_events(script, 1, svc.mock, env())
        return {"applied": len(script)}

    @app.post("/reset")
    def reset(body: ResetRequest) -> dict[str, str]:
        with svc.lock:
            svc.reset(clock=body.clock, seed=body.seed, inadequate_after=body.inadequate_after)
        return {"status": "reset"}

    return app
