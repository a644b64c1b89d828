"""Exact min-max solver for small DRFSP instances.

The search has two layers. Per scenario, a depth-first enumeration of route
partitions (each route a feasible, type-compatible group of entries) yields
the Pareto-minimal route counts per type. Route groups are opened in order of
their first entry, which fixes the agent-slot labelling. Then a search over
first-stage fleets ``y`` (shared by all scenarios) prices each scenario as
``c.y + sigma_k * c.(n - y)^+`` and keeps the min-max fleet.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .instance import DEPOT, DrfspInstance, InfeasibleInstanceError, Scenario, TimetableEntry
from .plan import AgentRoute, FleetPlan
from .routing import build_route

OPTIMAL = "optimal"
FEASIBLE = "feasible-only"

_EPS = 1e-9


class SearchLimitError(RuntimeError):
    """A limit stopped the search before any plan within the agent supply was found."""

    def __init__(self, message: str, lower_bound: float):
        super().__init__(message)
        self.lower_bound = lower_bound


class _Budget:
    def __init__(self, node_limit: int, time_limit: Optional[float]):
        self.node_limit = node_limit
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit
        self.nodes = 0
        self.exhausted = False

    def tick(self) -> bool:
        self.nodes += 1
        if self.nodes > self.node_limit or (
            self.deadline is not None and self.nodes % 512 == 0 and time.perf_counter() > self.deadline
        ):
            self.exhausted = True
        return not self.exhausted


class _ScenarioRoutes:
    """Route feasibility of entry subsets via earliest-finish dynamic programming."""

    def __init__(self, instance: DrfspInstance, sc: Scenario):
        self.instance = instance
        self.entries: List[TimetableEntry] = list(sc.entries)
        self._fin: Dict[int, Dict[int, Tuple[float, int]]] = {}
        self._types: Dict[int, frozenset] = {}
        d = instance.travel_time
        for i, e in enumerate(self.entries):
            t = max(d(DEPOT, e.customer), e.ready)
            if t > e.due:
                raise InfeasibleInstanceError(
                    f"scenario {sc.index}: entry {e.entry_id} unreachable from the depot before its window closes"
                )
            self._fin[1 << i] = {i: (t + e.service, -1)}
            self._types[1 << i] = e.types

    def types(self, mask: int) -> frozenset:
        got = self._types.get(mask)
        if got is None:
            low = mask & -mask
            got = self.types(mask ^ low) & self._types[low]
            self._types[mask] = got
        return got

    def finishes(self, mask: int) -> Dict[int, Tuple[float, int]]:
        """last entry index -> (earliest finish, predecessor index) over orders of ``mask``."""
        got = self._fin.get(mask)
        if got is not None:
            return got
        d = self.instance.travel_time
        out: Dict[int, Tuple[float, int]] = {}
        g = mask
        while g:
            low = g & -g
            j = low.bit_length() - 1
            ej = self.entries[j]
            for i, (fin, _) in self.finishes(mask ^ low).items():
                start = max(fin + d(self.entries[i].customer, ej.customer), ej.ready)
                if start <= ej.due:
                    f = start + ej.service
                    if j not in out or f < out[j][0]:
                        out[j] = (f, i)
            g ^= low
        self._fin[mask] = out
        return out

    def feasible(self, mask: int) -> bool:
        return bool(self.finishes(mask))

    def order(self, mask: int) -> List[TimetableEntry]:
        fin = self.finishes(mask)
        last = min(fin, key=lambda j: (fin[j][0], j))
        seq = []
        while mask:
            seq.append(last)
            prev = self._fin[mask][last][1]
            mask ^= 1 << last
            last = prev
        return [self.entries[i] for i in reversed(seq)]


@dataclass
class _Front:
    """Pareto-minimal per-type route counts for one scenario, with a witness each."""

    vectors: Dict[Tuple[int, ...], Tuple[Tuple[int, int], ...]]  # counts -> ((block mask, type), ...)
    complete: bool


def _scenario_front(routes: _ScenarioRoutes, type_ids: Sequence[int], metric: bool, budget: _Budget) -> _Front:
    n = len(routes.entries)
    pos = {t: i for i, t in enumerate(type_ids)}
    seen_multisets = set()
    found: Dict[Tuple[int, ...], Tuple[Tuple[int, int], ...]] = {}

    def record(blocks):
        if not all(routes.feasible(b) for b in blocks):
            return
        allowed = [sorted(routes.types(b)) for b in blocks]
        key = tuple(sorted(tuple(a) for a in allowed))
        if key in seen_multisets:
            return
        seen_multisets.add(key)
        for choice in itertools.product(*allowed):
            vec = [0] * len(type_ids)
            for t in choice:
                vec[pos[t]] += 1
            vec = tuple(vec)
            if vec not in found:
                found[vec] = tuple(zip(blocks, choice))

    blocks: List[int] = []

    def dfs(i):
        if not budget.tick():
            return
        if i == n:
            record(list(blocks))
            return
        bit = 1 << i
        blocks.append(bit)
        dfs(i + 1)
        blocks.pop()
        for b in range(len(blocks)):
            if budget.exhausted:
                return
            nb = blocks[b] | bit
            if not routes.types(nb):
                continue
            # with the triangle inequality, dropping a visit never breaks a route,
            # so an infeasible group cannot become feasible by growing
            if metric and not routes.feasible(nb):
                continue
            old = blocks[b]
            blocks[b] = nb
            dfs(i + 1)
            blocks[b] = old

    dfs(0)
    if not found:
        # the limit struck before the first leaf; one route per entry is always a plan
        record([1 << i for i in range(n)])
    pareto = {
        v: w
        for v, w in found.items()
        if not any(u != v and all(a <= b for a, b in zip(u, v)) for u in found)
    }
    return _Front(pareto, not budget.exhausted)


def solve_exact(
    instance: DrfspInstance,
    node_limit: int = 5_000_000,
    time_limit: Optional[float] = None,
) -> FleetPlan:
    """Exact min-max fleet plan, or the best plan found when a limit stops the search.

    The returned plan carries ``lower_bound``/``upper_bound``; they coincide
    when ``proof == "optimal"``.
    """
    if node_limit < 1:
        raise ValueError("node_limit must be at least 1")
    budget = _Budget(node_limit, time_limit)
    type_ids = instance.type_ids
    cost = [instance.cost(t) for t in type_ids]
    total = sum(len(sc.entries) for sc in instance.scenarios)
    supply = instance.agent_supply if instance.agent_supply is not None else max(total, 1)
    metric = instance.is_metric()

    scen_routes = [_ScenarioRoutes(instance, sc) for sc in instance.scenarios]
    fronts = [_scenario_front(r, type_ids, metric, budget) for r in scen_routes]
    complete = all(f.complete for f in fronts)

    def dot(v):
        return sum(c * x for c, x in zip(cost, v))

    lower = 0.0
    for sc, f in zip(instance.scenarios, fronts):
        if not sc.entries:
            continue
        if f.complete:
            lower = max(lower, min(dot(v) for v in f.vectors))
        else:
            lower = max(lower, min(cost))

    def price(y):
        base = dot(y)
        z, picks = base, []
        for sc, f in zip(instance.scenarios, fronts):
            best = None
            for v in f.vectors:
                extra = tuple(max(0, a - b) for a, b in zip(v, y))
                if any(x > supply for x in extra):
                    continue
                c = dot(extra)
                if best is None or c < best[0] - _EPS:
                    best = (c, v)
            if best is None:
                return None, None
            z = max(z, base + sc.sigma * best[0])
            picks.append(best[1])
        return z, picks

    caps = [min(supply, max((v[i] for f in fronts for v in f.vectors), default=0)) for i in range(len(type_ids))]
    best: Optional[Tuple[float, Tuple[int, ...], list]] = None

    # Fleets are tried from large to small, so among equal-cost optima the one
    # buying more in the first stage is kept.
    y_budget = _Budget(max(1, node_limit - budget.nodes), None)
    y_budget.deadline = budget.deadline
    y = [0] * len(type_ids)

    def search(i, partial):
        nonlocal best
        if best is not None and (partial >= best[0] - _EPS or best[0] <= lower + _EPS):
            return
        if i == len(type_ids):
            if not y_budget.tick() and best is not None:
                return
            z, picks = price(y)
            if z is not None and (best is None or z < best[0] - _EPS):
                best = (z, tuple(y), picks)
            return
        for v in range(caps[i], -1, -1):
            if y_budget.exhausted and best is not None:
                return
            y[i] = v
            search(i + 1, partial + cost[i] * v)
        y[i] = 0

    search(0, 0.0)
    if best is None:
        if complete:
            raise InfeasibleInstanceError(f"no plan fits the agent supply P={supply}")
        raise SearchLimitError(f"limit reached before finding a plan within P={supply}", lower)
    z, fleet, picks = best
    finished = complete and not y_budget.exhausted
    if finished:
        lower = z

    routes: List[AgentRoute] = []
    second: Dict[Tuple[int, int], int] = {}
    for sc, routes_k, f, v in zip(instance.scenarios, scen_routes, fronts, picks):
        used = {t: 0 for t in type_ids}
        for mask, t in f.vectors[v]:
            i = type_ids.index(t)
            stage = 0 if used[t] < fleet[i] else 1
            slot = used[t] if stage == 0 else used[t] - fleet[i]
            used[t] += 1
            routes.append(AgentRoute(stage, slot, build_route(instance, t, sc.index, routes_k.order(mask))))
        for i, t in enumerate(type_ids):
            second[(sc.index, t)] = max(0, v[i] - fleet[i])

    first = dict(zip(type_ids, fleet))
    objective = max(
        sum(instance.cost(t) * (first[t] + sc.sigma * second[(sc.index, t)]) for t in type_ids)
        for sc in instance.scenarios
    )
    return FleetPlan(
        first_stage=first,
        second_stage=second,
        routes=tuple(routes),
        objective=objective,
        lower_bound=min(lower, objective),
        upper_bound=objective,
        proof=OPTIMAL if finished else FEASIBLE,
        nodes_explored=budget.nodes + y_budget.nodes,
        source="exact",
    )
