"""Phase 3: demand-robust weighted set cover (two-stage, min-max over scenarios).

A set bought in the first stage costs ``c`` and covers its elements in every
scenario; bought in the second stage for scenario ``k`` it costs
``sigma_k * c`` and covers only scenario ``k``. The objective is the largest
scenario cost ``c(first) + sigma_k * c(second_k)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .instance import DrfspInstance
from .route_sets import RouteSetCollection

OPTIMAL = "optimal"
FEASIBLE = "feasible-only"

_EPS = 1e-9


class WellPosednessError(ValueError):
    pass


@dataclass(frozen=True)
class DrwscSet:
    set_id: str
    cost: float
    elements: Tuple[FrozenSet[int], ...]  # per scenario


@dataclass(frozen=True)
class DrwscInstance:
    scenarios: Tuple[FrozenSet[int], ...]
    sets: Tuple[DrwscSet, ...]
    sigmas: Tuple[float, ...]
    labels: Dict[int, Tuple[int, int]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(frozenset(a) for a in self.scenarios))
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if len(self.sigmas) != len(self.scenarios):
            raise WellPosednessError("one inflation factor per scenario is required")
        if any(not s > 1 for s in self.sigmas):
            raise WellPosednessError("inflation factors must exceed 1")
        ids = [s.set_id for s in self.sets]
        if len(set(ids)) != len(ids):
            raise WellPosednessError("duplicate set id")
        for s in self.sets:
            if not s.cost > 0:
                raise WellPosednessError(f"set {s.set_id}: cost must be positive")
            if len(s.elements) != len(self.scenarios):
                raise WellPosednessError(f"set {s.set_id}: needs an element list per scenario")
            for k, els in enumerate(s.elements):
                if not els <= self.scenarios[k]:
                    raise WellPosednessError(f"set {s.set_id}: elements outside scenario {k}")
        for k, a in enumerate(self.scenarios):
            covered = frozenset().union(*(s.elements[k] for s in self.sets))
            missing = a - covered
            if missing:
                raise WellPosednessError(f"scenario {k}: elements {sorted(missing)} are in no set")

    @classmethod
    def from_subsets(cls, scenarios, sets, costs, sigmas) -> "DrwscInstance":
        """Build from plain subsets of the universe; set j covers ``sets[j] & A_k`` in scenario k."""
        scen = tuple(frozenset(a) for a in scenarios)
        return cls(
            scen,
            tuple(DrwscSet(str(j), float(c), tuple(frozenset(s) & a for a in scen)) for j, (s, c) in enumerate(zip(sets, costs))),
            tuple(sigmas),
        )

    @property
    def universe(self) -> FrozenSet[int]:
        return frozenset().union(*self.scenarios)

    @property
    def m(self) -> int:
        return len(self.scenarios)


@dataclass(frozen=True)
class DrwscSolution:
    first_stage: FrozenSet[str]
    second_stage: Tuple[FrozenSet[str], ...]
    objective: float
    proof: str
    nodes_explored: int = 0


def scenario_costs(inst: DrwscInstance, first: Sequence[str], second: Sequence[Sequence[str]]) -> List[float]:
    # sum in instance order so the result does not depend on container order
    first = set(first)
    c0 = sum(s.cost for s in inst.sets if s.set_id in first)
    out = []
    for k in range(inst.m):
        sec = set(second[k])
        out.append(c0 + inst.sigmas[k] * sum(s.cost for s in inst.sets if s.set_id in sec))
    return out


def objective(inst: DrwscInstance, first: Sequence[str], second: Sequence[Sequence[str]]) -> float:
    return max(scenario_costs(inst, first, second), default=0.0)


def uncovered_elements(inst: DrwscInstance, first: Sequence[str], second: Sequence[Sequence[str]]) -> List[Tuple[int, int]]:
    """(scenario, element) pairs the purchases leave uncovered."""
    by_id = {s.set_id: s for s in inst.sets}
    out = []
    for k, a in enumerate(inst.scenarios):
        got = set()
        for i in list(first) + list(second[k]):
            got |= by_id[i].elements[k]
        out.extend((k, e) for e in sorted(a - got))
    return out


def map_to_drwsc(collection: RouteSetCollection, instance: DrfspInstance) -> DrwscInstance:
    """Each (scenario, entry) becomes an element; each route set a purchasable set."""
    index: Dict[Tuple[int, int], int] = {}
    scenarios = []
    for sc in instance.scenarios:
        ids = []
        for e in sc.entries:
            index[(sc.index, e.entry_id)] = len(index)
            ids.append(index[(sc.index, e.entry_id)])
        scenarios.append(frozenset(ids))
    sets = []
    for rs in collection:
        per_k = [frozenset()] * instance.m
        for r in rs.members:
            per_k[r.scenario] = frozenset(index[(r.scenario, i)] for i in r.entry_ids)
        sets.append(DrwscSet(rs.set_id, instance.cost(rs.agent_type), tuple(per_k)))
    return DrwscInstance(
        tuple(scenarios),
        tuple(sets),
        tuple(sc.sigma for sc in instance.scenarios),
        labels={v: k for k, v in index.items()},
    )


# -- text dump -------------------------------------------------------------------


def format_drwsc(inst: DrwscInstance) -> str:
    lines = ["# drwsc", f"elements {len(inst.universe)}"]
    for k, a in enumerate(inst.scenarios):
        lines.append(f"scenario {k} sigma={inst.sigmas[k]!r} : " + " ".join(str(e) for e in sorted(a)))
    for s in inst.sets:
        parts = [f"set {s.set_id} cost={s.cost!r}"]
        for k, els in enumerate(s.elements):
            parts.append(f"{k}: " + " ".join(str(e) for e in sorted(els)))
        lines.append(" | ".join(parts))
    return "\n".join(lines) + "\n"


def parse_drwsc(text: str) -> DrwscInstance:
    scenarios, sigmas, sets = [], [], []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln or ln.startswith("elements"):
            continue
        if ln.startswith("scenario"):
            head, _, body = ln.partition(":")
            sigmas.append(float(head.split("sigma=")[1]))
            scenarios.append(frozenset(int(e) for e in body.split()))
        elif ln.startswith("set"):
            head, *chunks = [p.strip() for p in ln.split("|")]
            _, set_id, cost = head.split()
            els = []
            for ch in chunks:
                _, _, body = ch.partition(":")
                els.append(frozenset(int(e) for e in body.split()))
            sets.append(DrwscSet(set_id, float(cost.split("=")[1]), tuple(els)))
        else:
            raise ValueError(f"unrecognised line: {ln!r}")
    return DrwscInstance(tuple(scenarios), tuple(sets), tuple(sigmas))


# -- solvers ---------------------------------------------------------------------


class _Packed:
    """Bitmask view of an instance: bit b of scenario k is the b-th element of A_k."""

    def __init__(self, inst: DrwscInstance):
        self.inst = inst
        self.n = len(inst.sets)
        self.m = inst.m
        self.cost = [s.cost for s in inst.sets]
        self.sigma = list(inst.sigmas)
        pos = [{e: b for b, e in enumerate(sorted(a))} for a in inst.scenarios]
        self.full = [(1 << len(a)) - 1 for a in inst.scenarios]
        self.mask = [[sum(1 << pos[k][e] for e in s.elements[k]) for k in range(self.m)] for s in inst.sets]
        # covering sets per (scenario, bit)
        self.covers = [
            [[j for j in range(self.n) if self.mask[j][k] >> b & 1] for b in range(len(inst.scenarios[k]))]
            for k in range(self.m)
        ]

    def ids(self, idx) -> FrozenSet[str]:
        return frozenset(self.inst.sets[j].set_id for j in idx)


def solve_drwsc_greedy(inst: DrwscInstance) -> DrwscSolution:
    """First-stage-only greedy cover by newly covered elements per unit cost."""
    p = _Packed(inst)
    unc = list(p.full)
    chosen = []
    while any(unc):
        best, best_ratio = None, 0.0
        for j in range(p.n):
            gain = sum((p.mask[j][k] & unc[k]).bit_count() for k in range(p.m))
            if gain and gain / p.cost[j] > best_ratio + _EPS:
                best, best_ratio = j, gain / p.cost[j]
        if best is None:
            raise WellPosednessError("some element is in no set")
        chosen.append(best)
        for k in range(p.m):
            unc[k] &= ~p.mask[best][k]
    first, second = p.ids(chosen), tuple(frozenset() for _ in range(p.m))
    return DrwscSolution(first, second, objective(inst, first, second), FEASIBLE)


_UNDECIDED, _BOUGHT, _EXCLUDED = 0, 1, 2


@dataclass
class NodeTrace:
    """What the search knew at one node; used to audit bounds."""

    bought: FrozenSet[str]
    excluded: FrozenSet[str]
    bound: float


class _Search:
    def __init__(self, inst, node_limit, time_limit, trace):
        self.p = _Packed(inst)
        self.node_limit = node_limit
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit
        self.trace = trace
        self.nodes = 0
        self.truncated = False
        self.memo: List[Dict[int, Tuple[float, Tuple[int, ...]]]] = [dict() for _ in range(self.p.m)]
        g = solve_drwsc_greedy(inst)
        order = {s.set_id: j for j, s in enumerate(inst.sets)}
        self.best_z = g.objective
        self.best = (tuple(sorted(order[i] for i in g.first_stage)), tuple(() for _ in range(self.p.m)))
        self.best_second = 0

    def _tick(self) -> bool:
        self.nodes += 1
        if self.nodes > self.node_limit or (
            self.deadline is not None and self.nodes % 256 == 0 and time.perf_counter() > self.deadline
        ):
            self.truncated = True
        return not self.truncated

    def _share_bound(self, k, unc, status):
        p = self.p
        best: Dict[int, float] = {}
        for j in range(p.n):
            g = p.mask[j][k] & unc
            if not g:
                continue
            price = p.cost[j] if status[j] == _UNDECIDED else p.sigma[k] * p.cost[j]
            share = price / g.bit_count()
            while g:
                low = g & -g
                b = low.bit_length() - 1
                if share < best.get(b, float("inf")):
                    best[b] = share
                g ^= low
        return sum(best.values())

    def _cover(self, k, unc) -> Optional[Tuple[float, Tuple[int, ...]]]:
        """Exact min-cost cover of ``unc`` in scenario k (unscaled costs)."""
        if not unc:
            return 0.0, ()
        memo = self.memo[k]
        if unc in memo:
            return memo[unc]
        if not self._tick():
            return None
        p = self.p
        # branch on the element with the fewest covering sets
        cands = None
        g = unc
        while g:
            low = g & -g
            b = low.bit_length() - 1
            c = p.covers[k][b]
            if cands is None or len(c) < len(cands):
                cands = c
            g ^= low
        best = None
        for j in sorted(cands, key=lambda j: (p.cost[j] / (p.mask[j][k] & unc).bit_count(), j)):
            sub = self._cover(k, unc & ~p.mask[j][k])
            if sub is None:
                return None
            cand = (p.cost[j] + sub[0], tuple(sorted((j,) + sub[1])))
            if best is None or cand[0] < best[0] - _EPS:
                best = cand
        memo[unc] = best
        return best

    def _greedy_cover(self, k, unc) -> Tuple[float, Tuple[int, ...]]:
        p = self.p
        chosen = []
        while unc:
            j = max(range(p.n), key=lambda j: ((p.mask[j][k] & unc).bit_count() / p.cost[j], -j))
            chosen.append(j)
            unc &= ~p.mask[j][k]
        return sum(p.cost[j] for j in chosen), tuple(sorted(chosen))

    def _consider(self, z, first, second):
        n_second = sum(len(s) for s in second)
        if z < self.best_z - _EPS or (abs(z - self.best_z) <= _EPS and n_second < self.best_second):
            self.best_z, self.best, self.best_second = z, (tuple(sorted(first)), second), n_second

    def run(self, cov, c_first, status, bought):
        if not self._tick():
            return
        p = self.p
        unc = [p.full[k] & ~cov[k] for k in range(p.m)]
        if not any(unc):
            self._consider(c_first, bought, tuple(() for _ in range(p.m)))
            return
        bound = max(c_first + self._share_bound(k, unc[k], status) for k in range(p.m))
        if self.trace is not None:
            ids = lambda want: frozenset(p.inst.sets[j].set_id for j in range(p.n) if status[j] == want)
            self.trace(NodeTrace(ids(_BOUGHT), ids(_EXCLUDED), bound))
        if bound >= self.best_z - _EPS:
            return
        pick, pick_key = None, None
        for j in range(p.n):
            if status[j] != _UNDECIDED:
                continue
            gain = sum((p.mask[j][k] & unc[k]).bit_count() for k in range(p.m))
            if gain and (pick_key is None or gain / p.cost[j] > pick_key + _EPS):
                pick, pick_key = j, gain / p.cost[j]
        if pick is None:
            self._second_stage(c_first, bought, unc)
            return
        status[pick] = _BOUGHT
        self.run([cov[k] | p.mask[pick][k] for k in range(p.m)], c_first + p.cost[pick], status, bought + [pick])
        status[pick] = _EXCLUDED
        if not self.truncated:
            self.run(cov, c_first, status, bought)
        status[pick] = _UNDECIDED

    def _second_stage(self, c_first, bought, unc):
        p = self.p
        z = c_first
        second = []
        for k in range(p.m):
            res = None if self.truncated else self._cover(k, unc[k])
            if res is None:
                res = self._greedy_cover(k, unc[k])
            z = max(z, c_first + p.sigma[k] * res[0])
            second.append(res[1])
        self._consider(z, bought, tuple(second))


def solve_drwsc_exact(
    inst: DrwscInstance,
    node_limit: int = 1_000_000,
    time_limit: Optional[float] = None,
    trace: Optional[Callable[[NodeTrace], None]] = None,
) -> DrwscSolution:
    """Depth-first branch and bound over first-stage purchases.

    Branching picks the undecided set covering the most open elements per unit
    cost and tries buying it before excluding it. A node's bound is the worst
    scenario's committed first-stage cost plus, for every open element, the
    cheapest per-element share of a set that could still cover it (first-stage
    price for undecided sets, inflated price otherwise). Once no undecided set
    helps, each scenario's residual is covered exactly in the second stage. The
    greedy cover seeds the incumbent; equal-cost alternatives never displace
    an incumbent with fewer second-stage purchases.
    """
    if node_limit < 1:
        raise ValueError("node_limit must be at least 1")
    s = _Search(inst, node_limit, time_limit, trace)
    m = s.p.m
    s.run([0] * m, 0.0, [_UNDECIDED] * s.p.n, [])
    first, second = s.p.ids(s.best[0]), tuple(s.p.ids(sec) for sec in s.best[1])
    return DrwscSolution(first, second, objective(inst, first, second), FEASIBLE if s.truncated else OPTIMAL, s.nodes)


def read_drwsc(path: Union[str, Path]) -> DrwscInstance:
    return parse_drwsc(Path(path).read_text(encoding="utf-8"))
