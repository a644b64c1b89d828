"""The three-phase set-cover-mapping heuristic, end to end."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .drwsc import DrwscInstance, DrwscSolution, map_to_drwsc, solve_drwsc_exact
from .instance import DrfspInstance, InfeasibleInstanceError
from .plan import AgentRoute, FleetPlan
from .route_sets import RouteSetCollection, construct_route_sets
from .routing import Route, RoutePool, Visit, generate_routes, schedule

DEFAULT_DRWSC_NODE_LIMIT = 20_000


@dataclass
class ScmResult:
    plan: FleetPlan
    timing: Dict[str, float]
    pool: RoutePool
    collection: RouteSetCollection
    drwsc: DrwscInstance
    solution: DrwscSolution

    @property
    def work(self) -> int:
        """Deterministic effort: insertion evaluations plus set-cover search nodes."""
        return self.pool.evaluations + self.solution.nodes_explored


def _reschedule(instance, route: Route, keep) -> Optional[Route]:
    entries = [v.entry for v in route.visits if v.entry.entry_id in keep]
    timing = schedule(instance, entries)
    if timing is None:
        return None
    starts, ret = timing
    return Route(route.agent_type, route.scenario, tuple(Visit(e, s) for e, s in zip(entries, starts)), ret)


def _dedupe(instance, agents: List[Tuple[int, int, Route]]) -> List[Tuple[int, int, Route]]:
    """Serve each entry exactly once when purchased sets overlap in a scenario.

    An entry stays with the earliest agent whose remaining routes stay
    feasible without it elsewhere (always the first agent for metric travel
    times).
    """
    keep = [set(r.entry_ids) for _, _, r in agents]
    entries = sorted({eid for ids in keep for eid in ids})
    for eid in entries:
        holders = [a for a, ids in enumerate(keep) if eid in ids]
        if len(holders) < 2:
            continue
        for owner in holders:
            trial = [set(ids) for ids in keep]
            for a in holders:
                if a != owner:
                    trial[a].discard(eid)
            if all(_reschedule(instance, agents[a][2], trial[a]) is not None for a in holders):
                keep = trial
                break
        else:
            raise InfeasibleInstanceError(f"cannot assign entry {eid} to a single agent")
    return [(stage, slot, _reschedule(instance, r, ids)) for (stage, slot, r), ids in zip(agents, keep)]


def expand_plan(
    instance: DrfspInstance, collection: RouteSetCollection, solution: DrwscSolution
) -> FleetPlan:
    """Turn purchased route sets into agents: one agent of the set's type each."""
    sets = list(collection)
    first_ids = [s for s in sets if s.set_id in solution.first_stage]
    first = {t: 0 for t in instance.type_ids}
    first_slot = {}
    for s in first_ids:
        first_slot[s.set_id] = first[s.agent_type]
        first[s.agent_type] += 1
    second: Dict[Tuple[int, int], int] = {}
    routes: List[AgentRoute] = []
    for sc in instance.scenarios:
        k = sc.index
        agents = [(0, first_slot[s.set_id], s.members[k]) for s in first_ids]
        counts = {t: 0 for t in instance.type_ids}
        for s in sets:
            if s.set_id in solution.second_stage[k]:
                agents.append((1, counts[s.agent_type], s.members[k]))
                counts[s.agent_type] += 1
        for t, n in counts.items():
            second[(k, t)] = n
        for stage, slot, r in _dedupe(instance, agents):
            routes.append(AgentRoute(stage, slot, r))
    return FleetPlan(
        first_stage=first,
        second_stage=second,
        routes=tuple(routes),
        objective=solution.objective,
        proof=solution.proof,
        nodes_explored=solution.nodes_explored,
        source="scm",
    )


def run_scm(
    instance: DrfspInstance,
    phi: float = 0.5,
    node_limit: int = DEFAULT_DRWSC_NODE_LIMIT,
    time_limit: Optional[float] = None,
) -> ScmResult:
    """Generate routes, bundle them into route sets, solve the set cover, expand to a plan."""
    timing = {}
    t0 = time.perf_counter()
    pool = generate_routes(instance, phi)
    t1 = time.perf_counter()
    collection = construct_route_sets(pool, instance)
    t2 = time.perf_counter()
    drwsc = map_to_drwsc(collection, instance)
    solution = solve_drwsc_exact(drwsc, node_limit=node_limit, time_limit=time_limit)
    t3 = time.perf_counter()
    plan = expand_plan(instance, collection, solution)
    t4 = time.perf_counter()
    timing["generate_routes"] = t1 - t0
    timing["construct_route_sets"] = t2 - t1
    timing["solve_drwsc"] = t3 - t2
    timing["expand"] = t4 - t3
    timing["total"] = t4 - t0
    return ScmResult(plan, timing, pool, collection, drwsc, solution)
