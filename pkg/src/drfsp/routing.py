"""Phase 1: insertion heuristic building routes per agent type and scenario."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .instance import DEPOT, DrfspInstance, InfeasibleInstanceError, TimetableEntry


@dataclass(frozen=True)
class Visit:
    entry: TimetableEntry
    start: float


@dataclass(frozen=True)
class Route:
    """Depot-to-depot visit sequence for one agent of ``agent_type`` in ``scenario``.

    ``return_time`` is the arrival back at the depot (0 for an empty route).
    """

    agent_type: int
    scenario: int
    visits: Tuple[Visit, ...] = ()
    return_time: float = 0.0

    def __len__(self) -> int:
        return len(self.visits)

    @property
    def entries(self) -> Tuple[TimetableEntry, ...]:
        return tuple(v.entry for v in self.visits)

    @property
    def entry_ids(self) -> frozenset:
        return frozenset(v.entry.entry_id for v in self.visits)

    def dump(self) -> str:
        body = " -> ".join(f"({v.entry.entry_id}@{v.start:g})" for v in self.visits)
        path = f"0 -> {body} -> N" if body else "0 -> N"
        return f"{self.agent_type} {self.scenario} : {path}"


def schedule(instance: DrfspInstance, entries: Sequence[TimetableEntry]) -> Optional[Tuple[List[float], float]]:
    """Earliest service starts along ``entries`` and the depot return time.

    Returns None when some entry would start after its window closes.
    """
    starts = []
    loc, clock = DEPOT, 0.0
    for e in entries:
        t = max(clock + instance.travel_time(loc, e.customer), e.ready)
        if t > e.due:
            return None
        starts.append(t)
        loc, clock = e.customer, t + e.service
    return starts, clock + instance.travel_time(loc, DEPOT)


def build_route(instance: DrfspInstance, agent_type: int, scenario: int, entries: Sequence[TimetableEntry]) -> Route:
    timing = schedule(instance, entries)
    if timing is None:
        raise InfeasibleInstanceError(
            f"entries {[e.entry_id for e in entries]} admit no schedule in this order"
        )
    starts, ret = timing
    return Route(agent_type, scenario, tuple(Visit(e, t) for e, t in zip(entries, starts)), ret)


@dataclass(frozen=True)
class Insertion:
    feasible: bool
    objective: float = float("inf")
    start: Optional[float] = None
    reason: str = ""


def _evaluate(instance, visits, ret, entry, position, phi):
    # visits: list of (entry, start); ret: depot return time of the route
    d = instance.travel_time
    if position == 0:
        loc, clock = DEPOT, 0.0
    else:
        prev_e, prev_t = visits[position - 1]
        loc, clock = prev_e.customer, prev_t + prev_e.service
    t_i = max(clock + d(loc, entry.customer), entry.ready)
    if t_i > entry.due:
        return Insertion(False, reason=f"t_{entry.entry_id}={t_i:g} > l={entry.due:g}")
    loc, clock = entry.customer, t_i + entry.service
    delay = None
    for idx in range(position, len(visits)):
        e, old = visits[idx]
        new = max(clock + d(loc, e.customer), e.ready)
        if new > e.due:
            return Insertion(False, reason=f"t'_{e.entry_id}={new:g} > l={e.due:g}")
        if delay is None:
            delay = new - old
        if new == old:
            # downstream schedule unchanged from here on
            break
        loc, clock = e.customer, new + e.service
    else:
        new_ret = clock + d(loc, DEPOT)
        if delay is None:
            delay = new_ret - ret if visits else 0.0
    objective = (1.0 - phi) * delay + phi * (entry.due - t_i)
    return Insertion(True, objective, t_i)


def insertion_cost(
    route: Route, entry: TimetableEntry, position: int, phi: float, instance: DrfspInstance
) -> Insertion:
    """Evaluate inserting ``entry`` before the visit at ``position``.

    ``position == len(route)`` inserts before the depot return. The objective
    weighs the shift of the visit right after the insertion point (the depot
    return at the end of the route) against the slack left to the inserted
    entry: ``(1 - phi) * (t'_j - t_j) + phi * (l_i - t_i)``. For an empty
    route the shift term is zero.
    """
    if not 0 <= position <= len(route):
        raise ValueError(f"position {position} outside 0..{len(route)}")
    if route.agent_type not in entry.types:
        return Insertion(False, reason=f"type {route.agent_type} incompatible with entry {entry.entry_id}")
    visits = [(v.entry, v.start) for v in route.visits]
    return _evaluate(instance, visits, route.return_time, entry, position, phi)


@dataclass
class RoutePool:
    routes: Dict[Tuple[int, int], Tuple[Route, ...]] = field(default_factory=dict)
    insertions: int = 0
    evaluations: int = 0

    def get(self, t: int, k: int) -> Tuple[Route, ...]:
        return self.routes[(t, k)]

    def __contains__(self, key) -> bool:
        return key in self.routes

    def __iter__(self) -> Iterator[Route]:
        for key in sorted(self.routes):
            yield from self.routes[key]

    def dump(self) -> str:
        return "\n".join(r.dump() for r in self)


def _seed_route(instance, t, k, entry):
    t_i = max(instance.travel_time(DEPOT, entry.customer), entry.ready)
    if t_i > entry.due:
        raise InfeasibleInstanceError(
            f"scenario {k}: entry {entry.entry_id} unreachable from the depot before its window closes"
        )
    return [(entry, t_i)], t_i + entry.service + instance.travel_time(entry.customer, DEPOT)


def _route_one(instance: DrfspInstance, t: int, k: int, phi: float, pool: RoutePool) -> Tuple[Route, ...]:
    remaining = sorted(instance.scenarios[k].compatible(t), key=lambda e: e.entry_id)
    routes = []
    while remaining:
        seed = min(remaining, key=lambda e: (e.due, e.entry_id))
        remaining.remove(seed)
        visits, ret = _seed_route(instance, t, k, seed)
        pool.insertions += 1
        while remaining:
            best = None
            for e in remaining:
                for pos in range(len(visits) + 1):
                    pool.evaluations += 1
                    ins = _evaluate(instance, visits, ret, e, pos, phi)
                    if not ins.feasible:
                        continue
                    key = (ins.objective, e.entry_id, pos)
                    if best is None or key < best[0]:
                        best = (key, e, pos)
            if best is None:
                break
            _, e, pos = best
            route = build_route(instance, t, k, [v[0] for v in visits[:pos]] + [e] + [v[0] for v in visits[pos:]])
            visits = [(v.entry, v.start) for v in route.visits]
            ret = route.return_time
            remaining.remove(e)
            pool.insertions += 1
        routes.append(Route(t, k, tuple(Visit(e, s) for e, s in visits), ret))
    return tuple(routes)


def generate_routes(instance: DrfspInstance, phi: float = 0.5) -> RoutePool:
    """Route every compatible entry for each (type, scenario) pair.

    Each route is seeded with the unrouted entry of earliest due time and grown
    by the cheapest feasible insertion until nothing else fits. Ties go to the
    smaller entry id, then the earlier position.
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError("phi must lie in [0, 1]")
    pool = RoutePool()
    for sc in instance.scenarios:
        for t in instance.type_ids:
            pool.routes[(t, sc.index)] = _route_one(instance, t, sc.index, phi, pool)
    return pool
