"""Problem data: Solomon ingestion, DRFSP instances, instance generation and file I/O."""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

DEPOT = 0

# Compatibility probability per type count used by the benchmark protocol.
DEFAULT_COMPATIBILITY = {1: 1.0, 2: 0.10, 4: 0.40, 8: 0.80}


class SolomonParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InstanceError(ValueError):
    """Structurally invalid instance or configuration."""


class InfeasibleInstanceError(ValueError):
    """Some timetable entry cannot be served by any route."""


@dataclass(frozen=True)
class SolomonCustomer:
    id: int
    x: float
    y: float
    demand: float
    ready_time: float
    due_date: float
    service_time: float

    def __post_init__(self):
        if self.ready_time > self.due_date:
            raise InstanceError(f"customer {self.id}: ready time after due date")
        if self.service_time < 0:
            raise InstanceError(f"customer {self.id}: negative service time")


@dataclass(frozen=True)
class SolomonInstance:
    name: str
    vehicle_count: int
    capacity: float
    customers: Tuple[SolomonCustomer, ...]

    @property
    def depot(self) -> SolomonCustomer:
        return self.customers[0]

    def pool(self) -> List[SolomonCustomer]:
        """Customers eligible for sampling, in file order."""
        return [c for c in self.customers if c.id != DEPOT]


@dataclass(frozen=True)
class AgentType:
    id: int
    cost: float

    def __post_init__(self):
        if self.cost <= 0:
            raise InstanceError(f"type {self.id}: cost must be positive")


@dataclass(frozen=True)
class TimetableEntry:
    entry_id: int
    customer: int
    ready: float
    due: float
    service: float
    types: frozenset

    def __post_init__(self):
        if self.entry_id < 1:
            raise InstanceError("entry ids start at 1 (0 is the depot)")
        if not self.types:
            raise InstanceError(f"entry {self.entry_id}: empty compatible type set")
        if self.ready > self.due:
            raise InstanceError(f"entry {self.entry_id}: window start after window end")
        if self.service < 0:
            raise InstanceError(f"entry {self.entry_id}: negative service time")
        object.__setattr__(self, "types", frozenset(self.types))

    @property
    def window(self) -> Tuple[float, float]:
        return (self.ready, self.due)


@dataclass(frozen=True)
class Scenario:
    index: int
    entries: Tuple[TimetableEntry, ...]
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.sigma > 1:
            raise InstanceError(f"scenario {self.index}: inflation must exceed 1")
        ids = [e.entry_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InstanceError(f"scenario {self.index}: duplicate entry id")

    def entry(self, entry_id: int) -> TimetableEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise KeyError(entry_id)

    def compatible(self, t: int) -> List[TimetableEntry]:
        return [e for e in self.entries if t in e.types]

    @property
    def customers(self) -> frozenset:
        return frozenset(e.customer for e in self.entries)


Matrix = Dict[Tuple[int, int], float]


@dataclass(frozen=True)
class DrfspInstance:
    name: str
    customers: Tuple[SolomonCustomer, ...]
    types: Tuple[AgentType, ...]
    scenarios: Tuple[Scenario, ...]
    horizon: float = math.inf
    agent_supply: Optional[int] = None
    matrix: Optional[Matrix] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "customers", tuple(self.customers))
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.types:
            raise InstanceError("at least one agent type is required")
        if not self.scenarios:
            raise InstanceError("at least one scenario is required")
        by_id = {c.id: c for c in self.customers}
        if len(by_id) != len(self.customers):
            raise InstanceError("duplicate customer id")
        if DEPOT not in by_id:
            raise InstanceError("depot (customer 0) missing")
        type_ids = {t.id for t in self.types}
        if len(type_ids) != len(self.types):
            raise InstanceError("duplicate agent type id")
        for sc in self.scenarios:
            for e in sc.entries:
                if e.customer not in by_id or e.customer == DEPOT:
                    raise InstanceError(f"scenario {sc.index}: entry {e.entry_id} references unknown customer {e.customer}")
                if not e.types <= type_ids:
                    raise InstanceError(f"scenario {sc.index}: entry {e.entry_id} names an unknown type")
        if [sc.index for sc in self.scenarios] != list(range(len(self.scenarios))):
            raise InstanceError("scenario indices must be 0..m-1 in order")
        if self.agent_supply is not None and self.agent_supply < 1:
            raise InstanceError("agent supply must be positive")
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_cost", {t.id: t.cost for t in self.types})
        if self.matrix is not None:
            object.__setattr__(self, "matrix", _checked_matrix(self.matrix, by_id))

    # -- accessors -----------------------------------------------------------

    def customer(self, cid: int) -> SolomonCustomer:
        return self._by_id[cid]

    def cost(self, t: int) -> float:
        return self._cost[t]

    @property
    def type_ids(self) -> List[int]:
        return [t.id for t in self.types]

    @property
    def m(self) -> int:
        return len(self.scenarios)

    @property
    def T(self) -> int:
        return len(self.types)

    @property
    def W(self) -> int:
        return max(len(sc.entries) for sc in self.scenarios)

    def travel_time(self, a: int, b: int) -> float:
        """Travel time between two customers (0 is the depot)."""
        if a == b:
            return 0.0
        if self.matrix is not None:
            return self.matrix[(a, b)]
        ca, cb = self._by_id[a], self._by_id[b]
        return math.hypot(ca.x - cb.x, ca.y - cb.y)

    def is_metric(self, tol: float = 1e-9) -> bool:
        """Whether travel times obey the triangle inequality on used customers."""
        if self.matrix is None:
            return True
        cached = self.__dict__.get("_metric")
        if cached is not None:
            return cached
        ids = sorted({DEPOT} | {e.customer for sc in self.scenarios for e in sc.entries})
        d = self.travel_time
        ok = all(
            d(a, c) <= d(a, b) + d(b, c) + tol
            for a, b, c in itertools.product(ids, repeat=3)
        )
        object.__setattr__(self, "_metric", ok)
        return ok

    def with_supply(self, supply: Optional[int]) -> "DrfspInstance":
        return dataclasses.replace(self, agent_supply=supply)


def _checked_matrix(matrix: Mapping[Tuple[int, int], float], by_id) -> Matrix:
    full: Matrix = {}
    for (a, b), v in matrix.items():
        if v < 0:
            raise InstanceError(f"negative travel time {a}->{b}")
        if a == b and v != 0:
            raise InstanceError(f"nonzero travel time {a}->{a}")
        other = matrix.get((b, a), v)
        if other != v:
            raise InstanceError(f"asymmetric travel time {a}<->{b}")
        full[(a, b)] = float(v)
        full[(b, a)] = float(v)
    for a, b in itertools.permutations(by_id, 2):
        if (a, b) not in full:
            raise InstanceError(f"travel-time matrix lacks pair {a}-{b}")
    return full


# -- Solomon format --------------------------------------------------------------


def _number(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SolomonParseError(lineno, f"non-numeric field {tok!r}") from None
    if not math.isfinite(v):
        raise SolomonParseError(lineno, f"non-finite field {tok!r}")
    return v


def parse_solomon(text: Union[str, Iterable[str]]) -> SolomonInstance:
    """Parse a classic Solomon VRPTW file.

    Rows are returned in file order. Errors carry the 1-based line number.
    """
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    it = iter(rows)

    def expect(word: str) -> Tuple[int, str]:
        try:
            lineno, ln = next(it)
        except StopIteration:
            raise SolomonParseError(len(lines), f"unexpected end of file, expected {word}") from None
        if not ln.upper().startswith(word):
            raise SolomonParseError(lineno, f"expected {word!r} header, got {ln!r}")
        return lineno, ln

    try:
        _, name = next(it)
    except StopIteration:
        raise SolomonParseError(1, "empty file") from None
    expect("VEHICLE")
    expect("NUMBER")
    try:
        lineno, ln = next(it)
    except StopIteration:
        raise SolomonParseError(len(lines), "missing vehicle numbers") from None
    toks = ln.split()
    if len(toks) != 2:
        raise SolomonParseError(lineno, "vehicle line must hold NUMBER and CAPACITY")
    vehicles = _number(toks[0], lineno)
    if vehicles != int(vehicles):
        raise SolomonParseError(lineno, "vehicle count must be an integer")
    capacity = _number(toks[1], lineno)
    expect("CUSTOMER")
    expect("CUST")

    customers: List[SolomonCustomer] = []
    seen = set()
    for lineno, ln in it:
        toks = ln.split()
        if len(toks) != 7:
            raise SolomonParseError(lineno, f"expected 7 columns, got {len(toks)}")
        vals = [_number(t, lineno) for t in toks]
        if vals[0] != int(vals[0]) or vals[0] < 0:
            raise SolomonParseError(lineno, "customer number must be a nonnegative integer")
        cid = int(vals[0])
        if cid in seen:
            raise SolomonParseError(lineno, f"duplicate customer {cid}")
        seen.add(cid)
        try:
            customers.append(SolomonCustomer(cid, *vals[1:]))
        except InstanceError as exc:
            raise SolomonParseError(lineno, str(exc)) from None
    if DEPOT not in seen:
        raise SolomonParseError(len(lines), "missing depot row (customer 0)")
    return SolomonInstance(name, int(vehicles), capacity, tuple(customers))


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def format_solomon(inst: SolomonInstance) -> str:
    out = [
        inst.name,
        "",
        "VEHICLE",
        "NUMBER     CAPACITY",
        f"  {inst.vehicle_count:<10} {_fmt(inst.capacity)}",
        "",
        "CUSTOMER",
        "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME",
        "",
    ]
    for c in inst.customers:
        vals = [c.id, c.x, c.y, c.demand, c.ready_time, c.due_date, c.service_time]
        out.append("".join(f"{_fmt(v):>11}" for v in vals))
    return "\n".join(out) + "\n"


def read_solomon(path: Union[str, Path]) -> SolomonInstance:
    return parse_solomon(Path(path).read_text(encoding="utf-8", errors="replace"))


def synthetic_solomon(kind: str = "R1", n: int = 100, seed: int = 0) -> SolomonInstance:
    """Random Solomon-layout customer data.

    ``R1`` mimics the short-horizon, narrow-window class and ``R2`` the
    long-horizon, wide-window class. Values are rounded to integers like the
    published files, and every customer is reachable from the depot within its
    window.
    """
    params = {"R1": (230, 5, 30), "R2": (1000, 30, 150)}
    if kind not in params:
        raise InstanceError(f"unknown synthetic kind {kind!r}; use one of {sorted(params)}")
    horizon, hw_lo, hw_hi = params[kind]
    rng = random.Random(f"synthetic/{kind}/{n}/{seed}")
    depot = SolomonCustomer(0, 35, 35, 0, 0, horizon, 0)
    customers = [depot]
    for cid in range(1, n + 1):
        x, y = rng.randint(0, 70), rng.randint(0, 70)
        reach = math.ceil(math.hypot(x - 35, y - 35))
        latest = horizon - reach - 10
        centre = rng.randint(reach, max(reach, latest))
        half = rng.randint(hw_lo, hw_hi)
        ready = max(0, centre - half)
        due = max(reach, min(latest, centre + half))
        due = max(due, ready)
        customers.append(SolomonCustomer(cid, x, y, rng.randint(1, 40), ready, due, 10))
    return SolomonInstance(f"SYN-{kind}", 25, 200, tuple(customers))


def load_source(name: str, solomon_dir: Optional[Union[str, Path]] = None) -> SolomonInstance:
    """Resolve a source name to customer data.

    ``SYN-R1`` / ``SYN-R2`` produce synthetic data; any other name is looked up
    as ``<name>.txt`` (case-insensitive) inside ``solomon_dir``.
    """
    if name.upper().startswith("SYN-"):
        return synthetic_solomon(name.upper()[4:])
    if solomon_dir is None:
        raise InstanceError(f"source {name!r} needs a Solomon directory (--solomon-dir or DRFSP_SOLOMON_DIR)")
    for p in Path(solomon_dir).iterdir():
        if p.stem.upper() == name.upper() and p.suffix.lower() == ".txt":
            return read_solomon(p)
    raise InstanceError(f"no file for source {name!r} in {solomon_dir}")


# -- generation ------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationConfig:
    source_instance: str
    N: int
    T: int
    m: int
    sigma: float = 2.0
    phi: float = 0.5
    compatibility_prob: Optional[float] = None
    rng_seed: int = 0
    replications: int = 10
    type_costs: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.N < 1:
            raise InstanceError("N must be at least 1")
        if self.T < 1 or self.m < 1:
            raise InstanceError("T and m must be at least 1")
        if not 0.0 <= self.phi <= 1.0:
            raise InstanceError("phi must lie in [0, 1]")
        if not self.sigma > 1:
            raise InstanceError("sigma must exceed 1")
        if self.replications < 1:
            raise InstanceError("replications must be at least 1")
        p = self.compatibility_prob
        if p is None:
            if self.T not in DEFAULT_COMPATIBILITY:
                raise InstanceError(f"no default compatibility probability for T={self.T}; set compatibility_prob")
            object.__setattr__(self, "compatibility_prob", DEFAULT_COMPATIBILITY[self.T])
        elif not 0.0 < p <= 1.0:
            raise InstanceError("compatibility_prob must lie in (0, 1]")
        if self.type_costs is not None:
            costs = tuple(float(c) for c in self.type_costs)
            if len(costs) != self.T or any(c <= 0 for c in costs):
                raise InstanceError("type_costs needs T positive values")
            object.__setattr__(self, "type_costs", costs)
        if not 0 <= self.rng_seed < 2**64:
            raise InstanceError("rng_seed must be a 64-bit unsigned integer")

    def replication_seed(self, rep: int) -> int:
        digest = hashlib.blake2b(f"{self.rng_seed}/{rep}".encode(), digest_size=8).digest()
        return int.from_bytes(digest, "big")


def generate_instance(
    cfg: GenerationConfig, source: SolomonInstance, seed: Optional[int] = None
) -> DrfspInstance:
    """Sample a DRFSP instance: N customers per scenario, drawn with replacement."""
    seed = cfg.rng_seed if seed is None else seed
    pool = source.pool()
    if not pool:
        raise InstanceError("source instance has no customers besides the depot")
    rng = random.Random(seed)
    type_ids = list(range(1, cfg.T + 1))
    costs = cfg.type_costs or (1.0,) * cfg.T
    scenarios = []
    used = set()
    for k in range(cfg.m):
        entries = []
        for n in range(cfg.N):
            c = rng.choice(pool)
            while True:
                ts = [t for t in type_ids if rng.random() < cfg.compatibility_prob]
                if ts:
                    break
            used.add(c.id)
            entries.append(TimetableEntry(n + 1, c.id, c.ready_time, c.due_date, c.service_time, frozenset(ts)))
        scenarios.append(Scenario(k, tuple(entries), cfg.sigma))
    customers = tuple(c for c in source.customers if c.id == DEPOT or c.id in used)
    return DrfspInstance(
        name=f"{source.name}-{cfg.N}-{cfg.T}-{cfg.m}-{seed}",
        customers=customers,
        types=tuple(AgentType(t, c) for t, c in zip(type_ids, costs)),
        scenarios=tuple(scenarios),
        horizon=source.depot.due_date,
    )


# -- instance files --------------------------------------------------------------


def format_instance(inst: DrfspInstance) -> str:
    out = ["# DRFSP instance", f"name = {inst.name}", f"horizon = {_fmt(inst.horizon) if math.isfinite(inst.horizon) else 'inf'}"]
    if inst.agent_supply is not None:
        out.append(f"agent_supply = {inst.agent_supply}")
    out.append("")
    out.append("[CUSTOMERS]")
    out.append("# id x y demand ready due service")
    for c in inst.customers:
        out.append(" ".join(_fmt(v) for v in (c.id, c.x, c.y, c.demand, c.ready_time, c.due_date, c.service_time)))
    out.append("")
    out.append("[TYPES]")
    for t in inst.types:
        out.append(f"{t.id} {_fmt(t.cost)}")
    for sc in inst.scenarios:
        out.append("")
        out.append(f"[SCENARIO {sc.index} sigma={_fmt(sc.sigma)}]")
        out.append("# entry_id customer_id e l s type_ids")
        for e in sc.entries:
            types = ",".join(str(t) for t in sorted(e.types))
            out.append(f"{e.entry_id} {e.customer} {_fmt(e.ready)} {_fmt(e.due)} {_fmt(e.service)} {types}")
    if inst.matrix is not None:
        ids = [c.id for c in inst.customers]
        out.append("")
        out.append("[MATRIX]")
        out.append("ids " + " ".join(str(i) for i in ids))
        for a in ids:
            out.append(f"{a} " + " ".join(_fmt(inst.travel_time(a, b)) for b in ids))
    return "\n".join(out) + "\n"


def parse_instance(text: str) -> DrfspInstance:
    header: Dict[str, str] = {}
    customers, types, scenarios = [], [], []
    matrix: Optional[Matrix] = None
    matrix_ids: List[int] = []
    section = None
    current: Optional[dict] = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        try:
            if ln.startswith("["):
                if not ln.endswith("]"):
                    raise InstanceError("unterminated section header")
                parts = ln[1:-1].split()
                section = parts[0].upper()
                if section == "SCENARIO":
                    if len(parts) != 3 or not parts[2].startswith("sigma="):
                        raise InstanceError("scenario header must read [SCENARIO k sigma=value]")
                    current = {"index": int(parts[1]), "sigma": float(parts[2][6:]), "entries": []}
                    scenarios.append(current)
                elif section == "MATRIX":
                    matrix = {}
                elif section not in ("CUSTOMERS", "TYPES"):
                    raise InstanceError(f"unknown section {section}")
                continue
            if section is None:
                key, sep, value = ln.partition("=")
                if not sep:
                    raise InstanceError("expected key = value")
                header[key.strip()] = value.strip()
            elif section == "CUSTOMERS":
                vals = [float(v) for v in ln.split()]
                if len(vals) != 7:
                    raise InstanceError("customer line needs 7 fields")
                customers.append(SolomonCustomer(int(vals[0]), *vals[1:]))
            elif section == "TYPES":
                tid, cost = ln.split()
                types.append(AgentType(int(tid), float(cost)))
            elif section == "SCENARIO":
                toks = ln.split()
                if len(toks) != 6:
                    raise InstanceError("entry line needs 6 fields")
                ts = frozenset(int(t) for t in toks[5].split(","))
                current["entries"].append(
                    TimetableEntry(int(toks[0]), int(toks[1]), float(toks[2]), float(toks[3]), float(toks[4]), ts)
                )
            elif section == "MATRIX":
                toks = ln.split()
                if toks[0] == "ids":
                    matrix_ids = [int(t) for t in toks[1:]]
                    continue
                a = int(toks[0])
                vals = [float(v) for v in toks[1:]]
                if len(vals) != len(matrix_ids):
                    raise InstanceError("matrix row length differs from id list")
                for b, v in zip(matrix_ids, vals):
                    matrix[(a, b)] = v
        except (ValueError, AttributeError, TypeError) as exc:
            raise InstanceError(f"line {lineno}: {exc}") from None

    horizon = header.get("horizon", "inf")
    supply = header.get("agent_supply")
    return DrfspInstance(
        name=header.get("name", "unnamed"),
        customers=tuple(customers),
        types=tuple(types),
        scenarios=tuple(Scenario(s["index"], tuple(s["entries"]), s["sigma"]) for s in scenarios),
        horizon=float(horizon),
        agent_supply=int(supply) if supply else None,
        matrix=matrix,
    )


def read_instance(path: Union[str, Path]) -> DrfspInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def write_instance(inst: DrfspInstance, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_instance(inst), encoding="utf-8")
    return path


# -- configuration files ---------------------------------------------------------

_INT_KEYS = {"N", "T", "m", "rng_seed", "replications"}
_FLOAT_KEYS = {"sigma", "phi", "compatibility_prob"}


def parse_config(text: str) -> List[GenerationConfig]:
    """Parse ``key=value`` lines into configs.

    ``N``, ``T`` and ``m`` accept comma lists; the result is their cartesian
    product, ordered by (T, N, m).
    """
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InstanceError(f"config line {lineno}: expected key=value")
        raw[key.strip()] = value.strip()
    known = _INT_KEYS | _FLOAT_KEYS | {"source_instance", "type_costs"}
    unknown = set(raw) - known
    if unknown:
        raise InstanceError(f"unknown config keys: {sorted(unknown)}")
    if "source_instance" not in raw:
        raise InstanceError("config needs source_instance")
    grid = {k: [int(v) for v in raw.pop(k).split(",")] for k in ("N", "T", "m") if k in raw}
    for k in ("N", "T", "m"):
        if k not in grid:
            raise InstanceError(f"config needs {k}")
    base = {}
    for k, v in raw.items():
        if k in _INT_KEYS:
            base[k] = int(v)
        elif k in _FLOAT_KEYS:
            base[k] = float(v)
        elif k == "type_costs":
            base[k] = tuple(float(c) for c in v.split(","))
        else:
            base[k] = v
    return [
        GenerationConfig(N=n, T=t, m=m, **base)
        for t, n, m in itertools.product(sorted(grid["T"]), sorted(grid["N"]), sorted(grid["m"]))
    ]


def format_config(cfg: GenerationConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = ",".join(_fmt(c) for c in v)
        elif isinstance(v, float):
            v = _fmt(v)
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"


def read_config(path: Union[str, Path]) -> List[GenerationConfig]:
    return parse_config(Path(path).read_text(encoding="utf-8"))
