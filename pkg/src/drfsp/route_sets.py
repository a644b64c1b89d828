"""Phase 2: bundle one route per scenario into route sets, greedily by coverage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

from .instance import DrfspInstance
from .routing import Route, RoutePool


class ContractError(RuntimeError):
    pass


@dataclass(frozen=True)
class RouteSet:
    agent_type: int
    index: int
    members: Tuple[Route, ...]

    @property
    def set_id(self) -> str:
        return f"{self.agent_type}:{self.index}"

    @property
    def covered(self) -> Dict[int, frozenset]:
        return {r.scenario: r.entry_ids for r in self.members}


@dataclass
class RouteSetCollection:
    by_type: Dict[int, Tuple[RouteSet, ...]] = field(default_factory=dict)

    def __iter__(self) -> Iterator[RouteSet]:
        for t in sorted(self.by_type):
            yield from self.by_type[t]

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_type.values())

    def dump(self) -> str:
        lines = []
        for s in self:
            cov = "; ".join(
                f"k={k}: {{{', '.join(str(i) for i in sorted(ids))}}}" for k, ids in sorted(s.covered.items())
            )
            lines.append(f"S[{s.set_id}] {cov}")
        return "\n".join(lines)


def _pick(routes: Tuple[Route, ...], uncovered: set) -> int:
    best_key, best = None, 0
    for idx, r in enumerate(routes):
        new = r.entry_ids & uncovered
        if new:
            key = (-len(new), min(new), idx)
        else:
            # nothing left to cover here: take the largest route
            key = (1, -len(r), idx)
        if best_key is None or key < best_key:
            best_key, best = key, idx
    return best


def construct_route_sets(pool: RoutePool, instance: DrfspInstance) -> RouteSetCollection:
    """Greedy route-set construction, one type at a time.

    For each scenario the member is the route covering the most entries not yet
    in any set of this type; ties go to the route holding the smallest such
    entry id, then the lower route index. Scenarios whose entries are all
    covered contribute their largest route, and scenarios with no routes at all
    contribute an empty route.
    """
    out = RouteSetCollection()
    for t in instance.type_ids:
        uncovered: List[set] = []
        for sc in instance.scenarios:
            if (t, sc.index) not in pool:
                raise ContractError(f"route pool lacks routes for type {t}, scenario {sc.index}")
            uncovered.append({e.entry_id for e in sc.compatible(t)})
        sets = []
        while any(uncovered):
            before = sum(len(u) for u in uncovered)
            members = []
            for sc in instance.scenarios:
                k = sc.index
                routes = pool.get(t, k)
                if not routes:
                    members.append(Route(t, k))
                    continue
                r = routes[_pick(routes, uncovered[k])]
                uncovered[k] -= r.entry_ids
                members.append(r)
            if sum(len(u) for u in uncovered) >= before:
                raise ContractError(f"type {t}: routes do not cover the compatible entries")
            sets.append(RouteSet(t, len(sets), tuple(members)))
        out.by_type[t] = tuple(sets)
    return out
