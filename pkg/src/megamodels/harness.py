"""Mock managed system plus the stock behaviors behind the bundled
self-repair / self-optimization scenarios.

The managed system is a set of named components with a state, integer
parameters, and a load figure. Failures and load spikes are injected from
a JSON event script; repairs only happen through the ``effect`` behavior,
which applies the changes proposed on the architectural model (the causal
connection runs one way per behavior: ``update`` system-to-model,
``effect`` model-to-system).

Payload conventions (all plain dicts):

* ``ArchitecturalModel``: ``{"snapshot": {component: {...}},
  "annotations": {component: [finding, ...]}}``. Annotating behaviors only
  ever touch the ``annotations`` section.
* finding: ``{"kind": "failure"|"bottleneck", "detail": ...,
  "proposed_change": action | None, "strategy": strategy | None}``
* ``RepairStrategies`` / ``NewStrategies``: ``{"strategies": [{"matches":
  failure_kind, "action": action, "attempt_count": n, "success_count": n}]}``
* action: ``{"restart": true}`` | ``{"replace_component": true}`` |
  ``{"param": name, "new_value": v}``
* ``QueueingModel``: ``{"threshold": n}``;``ParameterVariability``:
  ``{"params": {name: {"min": a, "max": b}}}``

Behaviors find their models by the ids above, which every bundled ``.mm``
file uses.
"""

from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import ERR_INVALID, MegamodelError
from .interpreter import (
    Behavior,
    BehaviorCall,
    LogicalClock,
    MegamodelHandle,
    RuntimeEnvironment,
    WallClock,
)
from .metamodel import MegamodelDef
from .textio import parse_megamodel

STATE_OK = "ok"
STATE_FAILED = "failed"

ARCH_MODEL = "ArchitecturalModel"
STRATEGIES_MODEL = "RepairStrategies"
NEW_STRATEGIES_MODEL = "NewStrategies"
QUEUEING_MODEL = "QueueingModel"
VARIABILITY_MODEL = "ParameterVariability"
LAYER1_MODEL = "SelfRepairMM"

#: Scenario files shipped with the package, in figure order.
SCENARIO_FILES = (
    "fig1_self_repair.mm",
    "fig2_analysis.mm",
    "fig3_self_repair_modular.mm",
    "fig4_self_optimization.mm",
    "fig5_loop_sequence.mm",
    "fig6_ap.mm",
    "fig7_loop_overlapping.mm",
    "fig8_layer1.mm",
    "fig9_layer2.mm",
)


def scenario_path(name: str) -> Path:
    """Filesystem path of a bundled scenario file."""
    return Path(str(resources.files("megamodels").joinpath("scenarios"))) / name


def load_scenario_defs(names: Iterable[str]) -> list[MegamodelDef]:
    defs: list[MegamodelDef] = []
    for name in names:
        path = scenario_path(name)
        defs.extend(parse_megamodel(path.read_text(encoding="utf-8"), str(path)))
    return defs


@dataclass
class Component:
    state: str = STATE_OK
    failure_kind: str | None = None
    hidden: bool = False
    params: dict[str, int] = field(default_factory=dict)
    load: int = 0


class MockSystem:
    """The simulated managed system the feedback loops adapt."""

    def __init__(self, components: dict[str, Component] | None = None, seed: int = 0):
        self.components: dict[str, Component] = dict(components or {})
        self.cures: dict[str, dict[str, Any]] = {}
        self.rng = random.Random(seed)  # for custom randomized behaviors; stock ones are deterministic

    def ensure(self, name: str) -> Component:
        return self.components.setdefault(name, Component())

    def fail_component(self, name: str, kind: str, hidden: bool = False) -> None:
        comp = self.ensure(name)
        comp.state = STATE_FAILED
        comp.failure_kind = kind
        comp.hidden = hidden

    def clear_failure(self, name: str) -> None:
        comp = self.ensure(name)
        comp.state = STATE_OK
        comp.failure_kind = None
        comp.hidden = False

    def set_load(self, name: str, value: int) -> None:
        self.ensure(name).load = value

    def set_cure(self, kind: str, action: dict[str, Any]) -> None:
        self.cures[kind] = action

    def snapshot(self) -> dict[str, dict[str, Any]]:
        return {
            name: {
                "state": c.state,
                "failure_kind": c.failure_kind,
                "hidden": c.hidden,
                "params": dict(c.params),
                "load": c.load,
            }
            for name, c in sorted(self.components.items())
        }

    def apply_change(self, name: str, action: dict[str, Any]) -> bool:
        """Apply one proposed change; True iff it cured the failure."""
        comp = self.ensure(name)
        if "param" in action:
            comp.params[action["param"]] = action["new_value"]
        cured = comp.state == STATE_FAILED and action == self.cures.get(comp.failure_kind)
        if cured:
            self.clear_failure(name)
        return cured


# --- event scripts ---


@dataclass(frozen=True)
class ScriptEvent:
    at_run: int
    event: dict[str, Any]


def load_script(source: str | Path | Sequence[dict[str, Any]]) -> list[ScriptEvent]:
    """Load an event script: a JSON list of ``{"at_run": n, "event": {...}}``."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        data = list(source)
    if not isinstance(data, list):
        raise MegamodelError(ERR_INVALID, "event script must be a JSON list")
    events = []
    for item in data:
        events.append(ScriptEvent(at_run=int(item.get("at_run", 0)), event=dict(item["event"])))
    return events


def apply_script_events(script: Sequence[ScriptEvent], run_index: int, mock: MockSystem,
                        env: RuntimeEnvironment) -> None:
    """Apply every scripted event due before run ``run_index`` (1-based;
    ``at_run`` 0 means setup and fires before run 1)."""
    for entry in script:
        due = entry.at_run == run_index or (entry.at_run == 0 and run_index == 1)
        if not due:
            continue
        event = entry.event
        if "fail_component" in event:
            spec = event["fail_component"]
            mock.fail_component(spec["component"], spec["kind"], bool(spec.get("hidden", False)))
        elif "clear_failure" in event:
            mock.clear_failure(event["clear_failure"]["component"])
        elif "set_load" in event:
            spec = event["set_load"]
            mock.set_load(spec["component"], int(spec["value"]))
        elif "set_cure" in event:
            spec = event["set_cure"]
            mock.set_cure(spec["kind"], dict(spec["action"]))
        elif "set_strategies" in event:
            strategies = [_strategy(s) for s in event["set_strategies"]]
            env.repository.put(STRATEGIES_MODEL, {"strategies": strategies})
        else:
            raise MegamodelError(ERR_INVALID, f"unknown scripted event {sorted(event)}")


def _strategy(spec: dict[str, Any]) -> dict[str, Any]:
    return {
        "matches": spec["matches"],
        "action": dict(spec["action"]),
        "attempt_count": int(spec.get("attempt_count", 0)),
        "success_count": int(spec.get("success_count", 0)),
    }


# --- stock behaviors ---


def _failure_findings(annotations: dict[str, list], component: str) -> list[dict[str, Any]]:
    return [f for f in annotations.get(component, []) if f["kind"] == "failure"]


def stock_behaviors(mock: MockSystem, inadequate_after: int = 3) -> dict[str, Behavior]:
    """Behavior bindings for the bundled scenarios.

    ``inadequate_after`` is the number of fruitless attempts after which
    the strategy-management loop deems a repair strategy inadequate.
    """

    def update(call: BehaviorCall) -> str:
        arch = call.access(ARCH_MODEL)
        arch.write({"snapshot": mock.snapshot(), "annotations": {}})
        return "done"

    def check_for_failures(call: BehaviorCall) -> str:
        arch = call.access(ARCH_MODEL)
        payload = copy.deepcopy(arch.read())
        snapshot = payload["snapshot"]
        annotations = payload.setdefault("annotations", {})
        failed = False
        for name, comp in snapshot.items():
            kept = [f for f in annotations.get(name, []) if f["kind"] != "failure"]
            if comp["state"] == STATE_FAILED:
                failed = True
                # A hidden failure kind is only identified by deep analysis.
                detail = None if comp["hidden"] else comp["failure_kind"]
                kept.append({"kind": "failure", "detail": detail, "proposed_change": None, "strategy": None})
            if kept:
                annotations[name] = kept
            else:
                annotations.pop(name, None)
        arch.annotate(payload)
        return "failures" if failed else "no_failures"

    def deep_analysis(call: BehaviorCall) -> str:
        arch = call.access(ARCH_MODEL)
        payload = copy.deepcopy(arch.read())
        for name, findings in payload.get("annotations", {}).items():
            comp = payload["snapshot"].get(name, {})
            for finding in findings:
                if finding["kind"] == "failure" and finding["detail"] is None:
                    finding["detail"] = comp.get("failure_kind")
        arch.annotate(payload)
        return "done"

    def repair(call: BehaviorCall) -> str:
        strategies = (call.access(STRATEGIES_MODEL).read() or {}).get("strategies", [])
        arch = call.access(ARCH_MODEL)
        payload = arch.read()
        for name in sorted(payload.get("annotations", {})):
            for finding in _failure_findings(payload["annotations"], name):
                if finding["detail"] is None or finding["proposed_change"] is not None:
                    continue
                for strategy in strategies:
                    if strategy["matches"] == finding["detail"]:
                        finding["proposed_change"] = dict(strategy["action"])
                        finding["strategy"] = strategy
                        strategy["attempt_count"] += 1
                        break
        arch.write(payload)
        return "done"

    def effect(call: BehaviorCall) -> str:
        arch = call.access(ARCH_MODEL)
        payload = arch.read()
        for name in sorted(payload.get("annotations", {})):
            for finding in payload["annotations"][name]:
                change = finding.get("proposed_change")
                if change is None:
                    continue
                cured = mock.apply_change(name, change)
                if cured and finding.get("strategy") is not None:
                    finding["strategy"]["success_count"] += 1
                finding["proposed_change"] = None
        arch.write(payload)
        return "done"

    def analyze_bottlenecks(call: BehaviorCall) -> str:
        threshold = (call.access(QUEUEING_MODEL).read() or {}).get("threshold", 100)
        arch = call.access(ARCH_MODEL)
        payload = copy.deepcopy(arch.read())
        annotations = payload.setdefault("annotations", {})
        found = False
        for name, comp in payload["snapshot"].items():
            kept = [f for f in annotations.get(name, []) if f["kind"] != "bottleneck"]
            if comp["load"] > threshold:
                found = True
                kept.append({"kind": "bottleneck", "detail": comp["load"], "proposed_change": None, "strategy": None})
            if kept:
                annotations[name] = kept
            else:
                annotations.pop(name, None)
        arch.annotate(payload)
        return "bottlenecks" if found else "no_bottlenecks"

    def plan_optimization(call: BehaviorCall) -> str:
        bounds = (call.access(VARIABILITY_MODEL).read() or {}).get("params", {})
        arch = call.access(ARCH_MODEL)
        payload = arch.read()
        for name in sorted(payload.get("annotations", {})):
            for finding in payload["annotations"][name]:
                if finding["kind"] != "bottleneck" or finding["proposed_change"] is not None:
                    continue
                param, limits = next(iter(sorted(bounds.items())), ("workers", {"min": 1, "max": 8}))
                current = payload["snapshot"][name]["params"].get(param, limits["min"])
                proposed = min(limits["max"], max(limits["min"], current + 1))
                finding["proposed_change"] = {"param": param, "new_value": proposed}
        arch.write(payload)
        return "done"

    def check_success_rates(call: BehaviorCall) -> str:
        layer1: MegamodelHandle = call.access(LAYER1_MODEL).read()
        strategies = (layer1.model_payload(STRATEGIES_MODEL) or {}).get("strategies", [])
        for strategy in strategies:
            if strategy["attempt_count"] >= inadequate_after and strategy["success_count"] == 0:
                return "inadequate"
        return "adequate"

    def synthesize_strategies(call: BehaviorCall) -> str:
        layer1: MegamodelHandle = call.access(LAYER1_MODEL).read()
        arch = layer1.model_payload(ARCH_MODEL) or {}
        existing = (layer1.model_payload(STRATEGIES_MODEL) or {}).get("strategies", [])
        covered = {(s["matches"], json.dumps(s["action"], sort_keys=True)) for s in existing}
        synthesized: list[dict[str, Any]] = []
        for name, comp in sorted(arch.get("snapshot", {}).items()):
            kind = comp.get("failure_kind")
            if comp.get("state") != STATE_FAILED or kind is None:
                continue
            cure = mock.cures.get(kind)
            if cure is None:
                continue
            key = (kind, json.dumps(cure, sort_keys=True))
            if key in covered:
                continue
            covered.add(key)
            synthesized.append({"matches": kind, "action": dict(cure), "attempt_count": 0, "success_count": 0})
        proven = [copy.deepcopy(s) for s in existing if s["success_count"] > 0]
        call.access(NEW_STRATEGIES_MODEL).write({"strategies": synthesized + proven})
        return "done"

    def replace_strategies(call: BehaviorCall) -> str:
        new = call.access(NEW_STRATEGIES_MODEL).read() or {"strategies": []}
        layer1: MegamodelHandle = call.access(LAYER1_MODEL).read()
        layer1.replace_model(STRATEGIES_MODEL, copy.deepcopy(new))
        return "done"

    return {
        "update": update,
        "check_for_failures": check_for_failures,
        "deep_analysis": deep_analysis,
        "repair": repair,
        "effect": effect,
        "analyze_bottlenecks": analyze_bottlenecks,
        "plan_optimization": plan_optimization,
        "check_success_rates": check_success_rates,
        "synthesize_strategies": synthesize_strategies,
        "replace_strategies": replace_strategies,
    }


def seed_payloads(env: RuntimeEnvironment) -> None:
    """Default payload bindings for the bundled scenarios."""
    env.repository.put(ARCH_MODEL, {"snapshot": {}, "annotations": {}})
    env.repository.put(STRATEGIES_MODEL, {"strategies": []})
    env.repository.put(NEW_STRATEGIES_MODEL, {"strategies": []})
    env.repository.put(QUEUEING_MODEL, {"threshold": 100})
    env.repository.put(VARIABILITY_MODEL, {"params": {"workers": {"min": 1, "max": 8}}})
    env.repository.put("TGGRules", {"rules": []})
    env.repository.put("FailureAnalysisRules", {"rules": []})


def build_runtime(
    defs: Sequence[MegamodelDef] = (),
    *,
    clock: str | WallClock | LogicalClock = "wall",
    seed: int = 0,
    inadequate_after: int = 3,
) -> tuple[RuntimeEnvironment, MockSystem]:
    """A runtime environment wired to a fresh mock system with the stock
    behaviors bound and default payloads seeded."""
    if isinstance(clock, str):
        clock_obj = LogicalClock() if clock == "logical" else WallClock()
    else:
        clock_obj = clock
    env = RuntimeEnvironment(clock=clock_obj)
    mock = MockSystem(seed=seed)
    env.bind_behaviors(stock_behaviors(mock, inadequate_after=inadequate_after))
    seed_payloads(env)
    if defs:
        env.register_all(list(defs))
    return env, mock
