"""Fleet plans (first/second-stage purchases plus realised routes) and their validator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .instance import DEPOT, DrfspInstance
from .routing import Route, Visit

TOL = 1e-9


@dataclass(frozen=True)
class AgentRoute:
    stage: int  # 0: bought before the scenario is known, 1: bought after
    slot: int
    route: Route

    @property
    def scenario(self) -> int:
        return self.route.scenario

    @property
    def agent_type(self) -> int:
        return self.route.agent_type


@dataclass(frozen=True)
class FleetPlan:
    first_stage: Dict[int, int]
    second_stage: Dict[Tuple[int, int], int]  # (scenario, type) -> count
    routes: Tuple[AgentRoute, ...]
    objective: float
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    proof: str = "feasible-only"
    nodes_explored: int = 0
    source: str = ""

    def scenario_cost(self, instance: DrfspInstance, k: int) -> float:
        sigma = instance.scenarios[k].sigma
        return sum(
            instance.cost(t) * (self.first_stage.get(t, 0) + sigma * self.second_stage.get((k, t), 0))
            for t in instance.type_ids
        )

    def fleet_size(self) -> int:
        """Largest per-type agent count any scenario uses; the supply needed to reproduce the plan."""
        need = 0
        for t, n in self.first_stage.items():
            extra = max((v for (k, tt), v in self.second_stage.items() if tt == t), default=0)
            need = max(need, n + extra)
        for (k, t), v in self.second_stage.items():
            need = max(need, v)
        return max(need, 1)

    def dump(self) -> str:
        lines = [f"z = {self.objective:g}"]
        lines.append("first stage: " + ", ".join(f"type {t} x{n}" for t, n in sorted(self.first_stage.items())))
        for (k, t), n in sorted(self.second_stage.items()):
            if n:
                lines.append(f"second stage, scenario {k}: type {t} x{n}")
        for ar in sorted(self.routes, key=lambda a: (a.scenario, a.agent_type, a.stage, a.slot)):
            lines.append(f"[stage {ar.stage} slot {ar.slot}] {ar.route.dump()}")
        return "\n".join(lines)


def plan_to_dict(plan: FleetPlan) -> dict:
    return {
        "source": plan.source,
        "objective": plan.objective,
        "lower_bound": plan.lower_bound,
        "upper_bound": plan.upper_bound,
        "proof": plan.proof,
        "nodes_explored": plan.nodes_explored,
        "first_stage": {str(t): n for t, n in sorted(plan.first_stage.items())},
        "second_stage": [
            {"scenario": k, "type": t, "count": n} for (k, t), n in sorted(plan.second_stage.items())
        ],
        "routes": [
            {
                "scenario": ar.scenario,
                "type": ar.agent_type,
                "stage": ar.stage,
                "slot": ar.slot,
                "visits": [[v.entry.entry_id, v.start] for v in ar.route.visits],
                "return_time": ar.route.return_time,
            }
            for ar in plan.routes
        ],
    }


def plan_from_dict(d: dict, instance: DrfspInstance) -> FleetPlan:
    routes = []
    for r in d["routes"]:
        sc = instance.scenarios[r["scenario"]]
        visits = tuple(Visit(sc.entry(eid), float(t)) for eid, t in r["visits"])
        routes.append(AgentRoute(r["stage"], r["slot"], Route(r["type"], r["scenario"], visits, r.get("return_time", 0.0))))
    return FleetPlan(
        first_stage={int(t): n for t, n in d["first_stage"].items()},
        second_stage={(s["scenario"], s["type"]): s["count"] for s in d["second_stage"]},
        routes=tuple(routes),
        objective=d["objective"],
        lower_bound=d.get("lower_bound"),
        upper_bound=d.get("upper_bound"),
        proof=d.get("proof", "feasible-only"),
        nodes_explored=d.get("nodes_explored", 0),
        source=d.get("source", ""),
    )


def dumps_plan(plan: FleetPlan) -> str:
    return json.dumps(plan_to_dict(plan), indent=2, sort_keys=True)


@dataclass(frozen=True)
class Violation:
    family: str
    location: str
    detail: str

    def __str__(self):
        return f"{self.family} @ {self.location}: {self.detail}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    recomputed_objective: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, family, location, detail):
        self.violations.append(Violation(family, location, detail))

    def __str__(self):
        if self.ok:
            return f"OK (z = {self.recomputed_objective:g})"
        return "\n".join(str(v) for v in self.violations)


def validate_plan(plan: FleetPlan, instance: DrfspInstance) -> ValidationReport:
    """Check a plan against every constraint family of the MILP.

    Works from the plan's stated service times, re-walking each route from the
    depot; nothing from the solvers is reused. Violations are collected, never
    raised.
    """
    rep = ValidationReport()
    d = instance.travel_time
    types = set(instance.type_ids)
    supply = instance.agent_supply

    for t, n in plan.first_stage.items():
        if t not in types:
            rep.add("structure", f"type {t}", "unknown agent type")
        if n < 0:
            rep.add("structure", f"type {t}", "negative first-stage count")
        if supply is not None and n > supply:
            rep.add("supply (P)", f"type {t}", f"{n} first-stage agents exceed P={supply}")
    for (k, t), n in plan.second_stage.items():
        if t not in types or not 0 <= k < instance.m:
            rep.add("structure", f"scenario {k} type {t}", "unknown scenario or type")
        if n < 0:
            rep.add("structure", f"scenario {k} type {t}", "negative second-stage count")
        if supply is not None and n > supply:
            rep.add("supply (P)", f"scenario {k} type {t}", f"{n} second-stage agents exceed P={supply}")

    for sc in instance.scenarios:
        k = sc.index
        served: Dict[int, int] = {}
        used_slots = set()
        per_stage: Dict[Tuple[int, int], int] = {}
        for ar in plan.routes:
            if ar.scenario != k:
                continue
            t, r = ar.agent_type, ar.route
            where = f"scenario {k} type {t} stage {ar.stage} slot {ar.slot}"
            if ar.stage not in (0, 1) or t not in types:
                rep.add("structure", where, "invalid stage or type")
                continue
            key = (t, ar.stage, ar.slot)
            if key in used_slots:
                rep.add("depot departure (1d)", where, "agent leaves the depot more than once")
            used_slots.add(key)
            per_stage[(t, ar.stage)] = per_stage.get((t, ar.stage), 0) + 1
            limit = plan.first_stage.get(t, 0) if ar.stage == 0 else plan.second_stage.get((k, t), 0)
            if not 0 <= ar.slot < limit:
                family = "stage consistency (1j)" if ar.stage == 0 else "second-stage purchase (1b)"
                rep.add(family, where, f"slot {ar.slot} not among {limit} purchased agents")

            loc, ready_at = DEPOT, 0.0
            seen_here = set()
            for v in r.visits:
                e = v.entry
                eid = e.entry_id
                try:
                    expected = sc.entry(eid)
                except KeyError:
                    rep.add("structure", where, f"entry {eid} not in the timetable")
                    continue
                if expected != e:
                    rep.add("structure", where, f"entry {eid} differs from the timetable record")
                if eid in seen_here:
                    rep.add("flow conservation (1f)", where, f"entry {eid} visited twice on one route")
                seen_here.add(eid)
                served[eid] = served.get(eid, 0) + 1
                if t not in expected.types:
                    rep.add("compatibility (1e)", where, f"type {t} may not serve entry {eid}")
                arrive = ready_at + d(loc, expected.customer)
                if v.start < arrive - TOL:
                    rep.add("time consistency (1g)", where, f"entry {eid} starts at {v.start:g} before arrival {arrive:g}")
                if v.start < expected.ready - TOL:
                    rep.add("time window (1h)", where, f"entry {eid} starts at {v.start:g} before {expected.ready:g}")
                if v.start > expected.due + TOL:
                    rep.add("time window (1i)", where, f"entry {eid} starts at {v.start:g} after {expected.due:g}")
                loc, ready_at = expected.customer, v.start + expected.service

        for e in sc.entries:
            n = served.get(e.entry_id, 0)
            if n != 1:
                rep.add("coverage (1c)", f"scenario {k} entry {e.entry_id}", f"served {n} times")
        for (t, stage), n in per_stage.items():
            limit = plan.first_stage.get(t, 0) if stage == 0 else plan.second_stage.get((k, t), 0)
            if n > limit:
                family = "stage consistency (1j)" if stage == 0 else "second-stage purchase (1b)"
                rep.add(family, f"scenario {k} type {t}", f"{n} stage-{stage} routes but {limit} agents")

    costs = [plan.scenario_cost(instance, k) for k in range(instance.m)]
    rep.recomputed_objective = max(costs)
    if abs(rep.recomputed_objective - plan.objective) > TOL * max(1.0, abs(plan.objective)):
        rep.add(
            "objective mismatch", "plan", f"claimed z={plan.objective!r}, recomputed {rep.recomputed_objective!r}"
        )
    return rep
