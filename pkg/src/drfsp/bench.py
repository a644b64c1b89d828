"""Replicated SCM-versus-exact experiments and their report tables."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .exact import OPTIMAL, solve_exact
from .instance import GenerationConfig, generate_instance, load_source
from .plan import validate_plan
from .scm import DEFAULT_DRWSC_NODE_LIMIT, run_scm

COLUMNS = [
    "N",
    "m",
    "time%",
    "alpha_lb",
    "alpha_ub",
    "t_SCM",
    "time%std",
    "sigma_alpha_lb",
    "sigma_alpha_ub",
    "TO",
    "lb zero",
    "T",
]

CLOCKS = ("wall", "work")


@dataclass(frozen=True)
class Limits:
    """Solver limits for one experiment.

    With ``clock="work"`` times are effort counts (insertion evaluations plus
    search nodes) and time limits are ignored, so results depend only on seeds.
    """

    time_limit: Optional[float] = 600.0
    node_limit: int = 5_000_000
    scm_node_limit: int = DEFAULT_DRWSC_NODE_LIMIT
    clock: str = "wall"

    def __post_init__(self):
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit < 1 or self.scm_node_limit < 1:
            raise ValueError("node limits must be positive")


@dataclass
class RunRecord:
    """Outcome of one replication, enough to recompute every aggregate."""

    source: str
    name: str
    N: int
    m: int
    T: int
    rep: int
    seed: int
    clock: str
    supply: Optional[int] = None
    scm_objective: Optional[float] = None
    scm_time: Optional[float] = None
    scm_valid: Optional[bool] = None
    exact_lower: Optional[float] = None
    exact_upper: Optional[float] = None
    exact_proof: Optional[str] = None
    exact_time: Optional[float] = None
    exact_valid: Optional[bool] = None
    error: Optional[str] = None

    @property
    def timed_out(self) -> bool:
        return self.exact_proof != OPTIMAL

    @property
    def lb_zero(self) -> bool:
        return self.exact_lower is not None and self.exact_lower <= 0


@dataclass
class ExperimentRow:
    name: str
    N: int
    m: int
    T: int
    seed: int
    replications: int
    completed: int
    TO: int
    lb_zero: int
    time_pct: Optional[float] = None
    alpha_lb: Optional[float] = None
    alpha_ub: Optional[float] = None
    t_scm_mean: Optional[float] = None
    time_pct_std: Optional[float] = None
    sigma_alpha_lb: Optional[float] = None
    sigma_alpha_ub: Optional[float] = None


def run_replication(cfg: GenerationConfig, rep: int, limits: Limits, solomon_dir=None) -> RunRecord:
    """Generate one instance, solve it both ways, and time the solver calls only."""
    seed = cfg.replication_seed(rep)
    rec = RunRecord(cfg.source_instance, cfg.source_instance, cfg.N, cfg.m, cfg.T, rep, seed, limits.clock)
    work = limits.clock == "work"
    time_limit = None if work else limits.time_limit
    try:
        inst = generate_instance(cfg, load_source(cfg.source_instance, solomon_dir), seed)
        rec.name = inst.name
        t0 = time.perf_counter()
        scm = run_scm(inst, cfg.phi, limits.scm_node_limit, time_limit)
        t1 = time.perf_counter()
        rec.scm_objective = scm.plan.objective
        rec.scm_time = float(scm.work) if work else t1 - t0
        rec.scm_valid = validate_plan(scm.plan, inst).ok
        rec.supply = scm.plan.fleet_size()
        bounded = inst.with_supply(rec.supply)
        t0 = time.perf_counter()
        plan = solve_exact(bounded, limits.node_limit, time_limit)
        t1 = time.perf_counter()
        rec.exact_lower, rec.exact_upper, rec.exact_proof = plan.lower_bound, plan.upper_bound, plan.proof
        rec.exact_time = float(plan.nodes_explored) if work else t1 - t0
        rec.exact_valid = validate_plan(plan, bounded).ok
    except Exception as exc:  # recorded, the experiment carries on
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _stats(values: List[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    return statistics.fmean(values), statistics.pstdev(values)


def aggregate(records: Sequence[RunRecord], seed: int = 0) -> ExperimentRow:
    """One table row from the replications of a single (N, m, T) setting.

    Timed-out runs and runs with a zero lower bound stay out of the means and
    spreads, but are counted in ``TO`` and ``lb_zero``.
    """
    if not records:
        raise ValueError("no records to aggregate")
    r0 = records[0]
    TO = sum(1 for r in records if r.timed_out)
    lb_zero = sum(1 for r in records if r.lb_zero)
    kept = [r for r in records if not r.timed_out and not r.lb_zero and r.error is None]
    time_pct = [(r.exact_time - r.scm_time) / r.exact_time * 100.0 for r in kept if r.exact_time > 0]
    a_lb = [r.scm_objective / r.exact_lower for r in kept]
    a_ub = [r.scm_objective / r.exact_upper for r in kept]
    row = ExperimentRow(
        name=r0.source,
        N=r0.N,
        m=r0.m,
        T=r0.T,
        seed=seed,
        replications=len(records),
        completed=len(records) - TO,
        TO=TO,
        lb_zero=lb_zero,
    )
    row.time_pct, row.time_pct_std = _stats(time_pct)
    row.alpha_lb, row.sigma_alpha_lb = _stats(a_lb)
    row.alpha_ub, row.sigma_alpha_ub = _stats(a_ub)
    row.t_scm_mean = statistics.fmean(r.scm_time for r in kept) if kept else None
    return row


def _run_one(args):
    return run_replication(*args)


def run_experiment(
    cfg: GenerationConfig,
    limits: Limits = Limits(),
    workers: int = 1,
    solomon_dir=None,
) -> Tuple[ExperimentRow, List[RunRecord]]:
    """All replications of ``cfg`` (in parallel when ``workers > 1``) and their aggregate row."""
    jobs = [(cfg, rep, limits, solomon_dir) for rep in range(cfg.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    return aggregate(records, cfg.rng_seed), records


def run_suite(
    configs: Iterable[GenerationConfig],
    limits: Limits = Limits(),
    workers: int = 1,
    solomon_dir=None,
    raw_path: Optional[Union[str, Path]] = None,
) -> Tuple[List[ExperimentRow], List[RunRecord]]:
    rows, records = [], []
    for cfg in configs:
        row, recs = run_experiment(cfg, limits, workers, solomon_dir)
        rows.append(row)
        records.extend(recs)
    if raw_path is not None:
        write_records(records, raw_path)
    return rows, records


def write_records(records: Sequence[RunRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_records(path: Union[str, Path]) -> List[RunRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RunRecord(**json.loads(line)) for line in fh if line.strip()]


def regroup(records: Sequence[RunRecord]) -> List[List[RunRecord]]:
    """Split a flat record list back into per-setting groups, in first-seen order."""
    groups: Dict[Tuple, List[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.source, r.N, r.m, r.T), []).append(r)
    return list(groups.values())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.4f}"


def _cells(row: ExperimentRow) -> List[str]:
    vals = [
        row.N,
        row.m,
        row.time_pct,
        row.alpha_lb,
        row.alpha_ub,
        row.t_scm_mean,
        row.time_pct_std,
        row.sigma_alpha_lb,
        row.sigma_alpha_ub,
        row.TO,
        row.lb_zero,
        row.T,
    ]
    return [_cell(v) for v in vals]


def emit_report(rows: Sequence[ExperimentRow], csv_path: Optional[Union[str, Path]] = None) -> Tuple[str, str]:
    """CSV text and an aligned text table, rows sorted by (T, N, m)."""
    if not rows:
        raise ValueError("no rows to report")
    ordered = sorted(rows, key=lambda r: (r.T, r.N, r.m))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    body = [_cells(r) for r in ordered]
    w.writerows(body)
    text = buf.getvalue()
    if csv_path is not None:
        Path(csv_path).write_text(text, encoding="utf-8")
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(COLUMNS)]
    lines = ["  ".join(c.rjust(wd) for c, wd in zip(COLUMNS, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    lines.extend("  ".join(c.rjust(wd) for c, wd in zip(b, widths)) for b in body)
    return text, "\n".join(lines) + "\n"
