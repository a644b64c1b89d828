"""Exhaustive enumeration oracles for tiny instances.

Deliberately naive: they share no search logic with the solvers they check.
"""

from __future__ import annotations

import itertools
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .drwsc import DrwscInstance
from .instance import DEPOT, DrfspInstance, InfeasibleInstanceError, TimetableEntry


def drwsc_optimum(inst: DrwscInstance) -> Tuple[float, FrozenSet[str], Tuple[FrozenSet[str], ...]]:
    """Optimal objective over every first-stage subset and every second-stage subset per scenario."""
    sets = inst.sets
    subsets = [frozenset(c) for r in range(len(sets) + 1) for c in itertools.combinations(range(len(sets)), r)]

    def covered(chosen, k):
        out = set()
        for j in chosen:
            out |= sets[j].elements[k]
        return out

    def price(chosen):
        return sum(sets[j].cost for j in sorted(chosen))

    best = None
    for first in subsets:
        z = price(first)
        seconds = []
        for k, a in enumerate(inst.scenarios):
            need = a - covered(first, k)
            cheapest = min((s for s in subsets if need <= covered(s, k)), key=lambda s: (price(s), sorted(s)))
            seconds.append(cheapest)
            z = max(z, price(first) + inst.sigmas[k] * price(cheapest))
        if best is None or z < best[0] - 1e-9:
            best = (z, first, tuple(seconds))
    z, first, seconds = best
    ids = lambda idx: frozenset(sets[j].set_id for j in idx)
    return z, ids(first), tuple(ids(s) for s in seconds)


def route_feasible(instance: DrfspInstance, entries: Sequence[TimetableEntry]) -> Optional[Tuple[TimetableEntry, ...]]:
    """Some visiting order of ``entries`` that respects every window, by trying all orders."""
    for order in itertools.permutations(entries):
        loc, clock, ok = DEPOT, 0.0, True
        for e in order:
            t = max(clock + instance.travel_time(loc, e.customer), e.ready)
            if t > e.due:
                ok = False
                break
            loc, clock = e.customer, t + e.service
        if ok:
            return order
    return None


def set_partitions(items: Sequence) -> Iterator[List[List]]:
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[head]] + part
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1 :]


def min_fleet(instance: DrfspInstance, k: int, agent_type: Optional[int] = None) -> int:
    """Fewest routes serving scenario k (optionally only with ``agent_type``)."""
    entries = list(instance.scenarios[k].entries)
    best = None
    for part in set_partitions(entries):
        if best is not None and len(part) >= best:
            continue
        ok = True
        for block in part:
            allowed = frozenset.intersection(*(e.types for e in block))
            if agent_type is not None:
                allowed &= {agent_type}
            if not allowed or route_feasible(instance, block) is None:
                ok = False
                break
        if ok:
            best = len(part)
    if best is None:
        raise InfeasibleInstanceError(f"scenario {k} cannot be served")
    return best


def _stage_patterns(instance: DrfspInstance, k: int) -> List[Dict[Tuple[int, int], int]]:
    """Every achievable count of (type, stage) routes for scenario k."""
    entries = list(instance.scenarios[k].entries)
    patterns = set()
    for part in set_partitions(entries):
        options = []
        for block in part:
            allowed = frozenset.intersection(*(e.types for e in block))
            if not allowed or route_feasible(instance, block) is None:
                options = None
                break
            options.append([(t, s) for t in sorted(allowed) for s in (0, 1)])
        if options is None:
            continue
        for choice in itertools.product(*options):
            counts: Dict[Tuple[int, int], int] = {}
            for key in choice:
                counts[key] = counts.get(key, 0) + 1
            patterns.add(tuple(sorted(counts.items())))
    return [dict(p) for p in patterns]


def drfsp_optimum(instance: DrfspInstance) -> float:
    """Min-max optimum by enumerating partitions, route types, stages and first-stage fleets.

    For a first-stage fleet y, scenario k may run at most ``y[t]`` stage-0
    routes and at most P stage-1 routes of type t, paying
    ``sum_t c_t * (y[t] + sigma_k * stage1[t])``.
    """
    total = sum(len(sc.entries) for sc in instance.scenarios)
    supply = instance.agent_supply if instance.agent_supply is not None else max(total, 1)
    patterns = [_stage_patterns(instance, sc.index) for sc in instance.scenarios]
    types = instance.type_ids
    best = None
    for y in itertools.product(range(supply + 1), repeat=len(types)):
        fleet = dict(zip(types, y))
        base = sum(instance.cost(t) * fleet[t] for t in types)
        z = base
        for sc, pats in zip(instance.scenarios, patterns):
            costs = [
                base + sc.sigma * sum(instance.cost(t) * n for (t, s), n in p.items() if s == 1)
                for p in pats
                if all((n <= fleet[t]) if s == 0 else (n <= supply) for (t, s), n in p.items())
            ]
            if not costs:
                z = None
                break
            z = max(z, min(costs))
        if z is not None and (best is None or z < best):
            best = z
    if best is None:
        raise InfeasibleInstanceError("no plan fits the agent supply")
    return best
