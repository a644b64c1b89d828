"""The fleet-size MILP as explicit rows, with an LP-format writer.

Nothing here solves the model. It exists so an external MILP solver can
cross-check the combinatorial solver, and so a plan can be tested against
the rows directly.

Variable names:
    x_s_k_t_p_i_j   arc i -> j of agent p (type t, stage s) in scenario k;
                    i is 0 or an entry id, j is an entry id or ``N``
    t_s_k_t_p_i     service start of entry i
    y_t_p           agent p of type t bought in the first stage
    z               worst scenario cost
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .instance import DEPOT, DrfspInstance
from .plan import FleetPlan

SINK = "N"


@dataclass(frozen=True)
class BigMConfig:
    M: float

    @classmethod
    def for_instance(cls, instance: DrfspInstance) -> "BigMConfig":
        """Smallest constant that never cuts off a feasible schedule."""
        entries = [e for sc in instance.scenarios for e in sc.entries]
        if not entries:
            return cls(1.0)
        latest = max(e.due for e in entries)
        service = max(e.service for e in entries)
        nodes = [DEPOT] + sorted({e.customer for e in entries})
        dist = max(instance.travel_time(a, b) for a in nodes for b in nodes)
        return cls(latest + service + dist)


@dataclass
class Row:
    name: str
    coefs: Dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class Model:
    variables: List[str] = field(default_factory=list)
    binaries: set = field(default_factory=set)
    bounds: Dict[str, Tuple[float, Optional[float]]] = field(default_factory=dict)
    objective: Dict[str, float] = field(default_factory=dict)
    rows: List[Row] = field(default_factory=list)

    def add_var(self, name: str, binary: bool = False, lb: float = 0.0, ub: Optional[float] = None) -> str:
        self.variables.append(name)
        if binary:
            self.binaries.add(name)
            ub = 1.0
        self.bounds[name] = (lb, ub)
        return name

    def add_row(self, name: str, coefs: Dict[str, float], sense: str, rhs: float) -> None:
        self.rows.append(Row(name, {v: c for v, c in coefs.items() if c != 0}, sense, rhs))

    def violated(self, values: Dict[str, float], tol: float = 1e-6) -> List[str]:
        """Names of rows (and bounds) that ``values`` breaks; unset variables read as 0."""
        bad = []
        for v in self.variables:
            lb, ub = self.bounds[v]
            x = values.get(v, 0.0)
            if x < lb - tol or (ub is not None and x > ub + tol):
                bad.append(f"bound:{v}")
        for r in self.rows:
            lhs = sum(c * values.get(v, 0.0) for v, c in r.coefs.items())
            if (
                (r.sense == "<=" and lhs > r.rhs + tol)
                or (r.sense == ">=" and lhs < r.rhs - tol)
                or (r.sense == "=" and abs(lhs - r.rhs) > tol)
            ):
                bad.append(r.name)
        return bad

    def to_arrays(self):
        """Dense ``(c, A, lo, hi, integrality, var_lo, var_hi)`` as plain lists, for any array library."""
        index = {v: i for i, v in enumerate(self.variables)}
        n = len(self.variables)
        c = [0.0] * n
        for v, coef in self.objective.items():
            c[index[v]] = coef
        A, lo, hi = [], [], []
        inf = float("inf")
        for r in self.rows:
            row = [0.0] * n
            for v, coef in r.coefs.items():
                row[index[v]] = coef
            A.append(row)
            lo.append(r.rhs if r.sense in (">=", "=") else -inf)
            hi.append(r.rhs if r.sense in ("<=", "=") else inf)
        integrality = [1 if v in self.binaries else 0 for v in self.variables]
        var_lo = [self.bounds[v][0] for v in self.variables]
        var_hi = [inf if self.bounds[v][1] is None else self.bounds[v][1] for v in self.variables]
        return c, A, lo, hi, integrality, var_lo, var_hi


def _x(s, k, t, p, i, j):
    return f"x_{s}_{k}_{t}_{p}_{i}_{j}"


def _t(s, k, t, p, i):
    return f"t_{s}_{k}_{t}_{p}_{i}"


def build_model(instance: DrfspInstance, supply: Optional[int] = None, bigm: Optional[BigMConfig] = None) -> Model:
    """All rows of the model for ``instance`` with ``supply`` agent slots per type and stage.

    Besides the customer-to-customer timing rows, the departure from the depot
    also carries a timing row (``t_j >= d(0, j)`` when arc ``0 -> j`` is used),
    and each entry is served exactly once.
    """
    if supply is None:
        supply = instance.agent_supply
    if supply is None:
        supply = max(1, sum(len(sc.entries) for sc in instance.scenarios))
    M = (bigm or BigMConfig.for_instance(instance)).M
    d = instance.travel_time
    model = Model()
    z = model.add_var("z")
    model.objective[z] = 1.0
    types = instance.type_ids
    slots = range(supply)
    for t in types:
        for p in slots:
            model.add_var(f"y_{t}_{p}", binary=True)

    for sc in instance.scenarios:
        k = sc.index
        W = [e.entry_id for e in sc.entries]
        info = {e.entry_id: e for e in sc.entries}
        cost_row = {z: -1.0}
        cover: Dict[int, Dict[str, float]] = {j: {} for j in W}
        for t in types:
            for p in slots:
                cost_row[f"y_{t}_{p}"] = cost_row.get(f"y_{t}_{p}", 0.0) + instance.cost(t)
                for s in (0, 1):
                    arcs = [(0, j) for j in W + [SINK]] + [(i, j) for i in W for j in W + [SINK] if i != j]
                    for i, j in arcs:
                        model.add_var(_x(s, k, t, p, i, j), binary=True)
                    for i in W:
                        model.add_var(_t(s, k, t, p, i))
                    tag = f"{s}_{k}_{t}_{p}"
                    model.add_row(f"depart_{tag}", {_x(s, k, t, p, 0, j): 1.0 for j in W + [SINK]}, "<=", 1.0)
                    for j in W:
                        into = {_x(s, k, t, p, i, j): 1.0 for i in [0] + W if i != j}
                        for v in into:
                            cover[j][v] = 1.0
                        model.add_row(f"compat_{tag}_{j}", into, "<=", 1.0 if t in info[j].types else 0.0)
                        flow = dict(into)
                        for i in W + [SINK]:
                            if i != j:
                                flow[_x(s, k, t, p, j, i)] = -1.0
                        model.add_row(f"flow_{tag}_{j}", flow, "=", 0.0)
                        e = info[j]
                        model.add_row(f"ready_{tag}_{j}", {_t(s, k, t, p, j): 1.0}, ">=", e.ready)
                        model.add_row(f"due_{tag}_{j}", {_t(s, k, t, p, j): 1.0}, "<=", e.due)
                        model.add_row(
                            f"leave_{tag}_{j}",
                            {_t(s, k, t, p, j): -1.0, _x(s, k, t, p, 0, j): M},
                            "<=",
                            M - d(DEPOT, e.customer),
                        )
                        for i in W:
                            if i == j:
                                continue
                            a = info[i]
                            model.add_row(
                                f"time_{tag}_{i}_{j}",
                                {_t(s, k, t, p, i): 1.0, _t(s, k, t, p, j): -1.0, _x(s, k, t, p, i, j): M},
                                "<=",
                                M - a.service - d(a.customer, e.customer),
                            )
                        if s == 0:
                            model.add_row(
                                f"stage_{k}_{t}_{p}_{j}", {_x(0, k, t, p, 0, j): 1.0, f"y_{t}_{p}": -1.0}, "<=", 0.0
                            )
                    if s == 1:
                        for j in W:
                            cost_row[_x(1, k, t, p, 0, j)] = sc.sigma * instance.cost(t)
        model.add_row(f"minmax_{k}", cost_row, "<=", 0.0)
        for j in W:
            model.add_row(f"cover_{k}_{j}", cover[j], "=", 1.0)
    return model


def plan_values(plan: FleetPlan, instance: DrfspInstance, supply: int) -> Dict[str, float]:
    """Variable assignment that encodes ``plan`` (agent slot p of a stage becomes index p).

    Start times of entries an agent does not visit sit at the window opening,
    since the window rows bind every agent.
    """
    values: Dict[str, float] = {"z": plan.objective}
    for sc in instance.scenarios:
        for t in instance.type_ids:
            for p in range(supply):
                for s in (0, 1):
                    for e in sc.entries:
                        values[_t(s, sc.index, t, p, e.entry_id)] = e.ready
    for t, n in plan.first_stage.items():
        for p in range(min(n, supply)):
            values[f"y_{t}_{p}"] = 1.0
    for ar in plan.routes:
        s, k, t, p = ar.stage, ar.scenario, ar.agent_type, ar.slot
        prev = 0
        for v in ar.route.visits:
            j = v.entry.entry_id
            values[_x(s, k, t, p, prev, j)] = 1.0
            values[_t(s, k, t, p, j)] = v.start
            prev = j
        if ar.route.visits:
            values[_x(s, k, t, p, prev, SINK)] = 1.0
    return values


def _num(x: float) -> str:
    return f"{x:.12g}"


def _terms(coefs: Dict[str, float]) -> str:
    out = []
    for v, c in coefs.items():
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {v}")
    text = " ".join(out)
    return text[2:] if text.startswith("+ ") else text


def _wrap(text: str, width: int = 200) -> Iterable[str]:
    line = ""
    for tok in text.split(" "):
        if line and len(line) + len(tok) + 1 > width:
            yield line
            line = "   " + tok
        else:
            line = f"{line} {tok}" if line else tok
    if line:
        yield line


def format_lp(model: Model) -> str:
    """CPLEX LP text of ``model``."""
    ops = {"<=": "<=", ">=": ">=", "=": "="}
    lines = ["Minimize", *(" " + l for l in _wrap("obj: " + _terms(model.objective))), "Subject To"]
    for r in model.rows:
        lines.extend(" " + l for l in _wrap(f"{r.name}: {_terms(r.coefs)} {ops[r.sense]} {_num(r.rhs)}"))
    lines.append("Bounds")
    for v in model.variables:
        if v in model.binaries:
            continue
        lb, ub = model.bounds[v]
        lines.append(f" {_num(lb)} <= {v}" + ("" if ub is None else f" <= {_num(ub)}"))
    lines.append("Binaries")
    lines.extend(_wrap(" ".join(v for v in model.variables if v in model.binaries)))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(instance: DrfspInstance, path, supply: Optional[int] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_lp(build_model(instance, supply)))
