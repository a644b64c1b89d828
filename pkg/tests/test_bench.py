import dataclasses

import pytest

from drfsp.bench import (
    COLUMNS,
    Limits,
    RunRecord,
    aggregate,
    emit_report,
    read_records,
    regroup,
    run_experiment,
    run_suite,
)
from drfsp.instance import GenerationConfig

WORK = Limits(time_limit=None, node_limit=1_000_000, clock="work")


def _rec(rep, scm=3.0, lb=3.0, ub=3.0, proof="optimal", t_scm=1.0, t_mip=4.0, **kw):
    base = dict(
        source="SYN-R1", name=f"SYN-R1-5-1-1-{rep}", N=5, m=1, T=1, rep=rep, seed=rep, clock="wall",
        supply=3, scm_objective=scm, scm_time=t_scm, scm_valid=True, exact_lower=lb, exact_upper=ub,
        exact_proof=proof, exact_time=t_mip, exact_valid=True,
    )
    base.update(kw)
    return RunRecord(**base)


def test_metrics_follow_their_definitions():
    row = aggregate([_rec(0, scm=3, lb=2, ub=2, t_scm=1, t_mip=4), _rec(1, scm=4, lb=4, ub=4, t_scm=3, t_mip=4)])
    assert row.time_pct == pytest.approx((75.0 + 25.0) / 2)
    assert row.time_pct_std == pytest.approx(25.0)
    assert row.alpha_lb == pytest.approx((1.5 + 1.0) / 2)
    assert row.alpha_ub == row.alpha_lb
    assert row.sigma_alpha_lb == pytest.approx(0.25)
    assert row.t_scm_mean == 2.0
    assert (row.TO, row.lb_zero, row.completed, row.replications) == (0, 0, 2, 2)


def test_equal_objectives_give_unit_ratios():
    row = aggregate([_rec(r) for r in range(10)])
    assert row.alpha_lb == row.alpha_ub == 1.0
    assert row.sigma_alpha_lb == row.sigma_alpha_ub == 0.0


def test_all_timeouts_leave_blank_means():
    row = aggregate([_rec(r, lb=1.0, ub=5.0, proof="feasible-only") for r in range(10)])
    assert row.TO == 10 and row.completed == 0
    assert row.time_pct is row.alpha_lb is row.alpha_ub is row.t_scm_mean is None
    csv_text, _ = emit_report([row])
    assert csv_text.splitlines()[1] == "5,1,,,,,,,,10,0,1"


def test_zero_lower_bounds_are_counted_and_excluded():
    row = aggregate([_rec(0, lb=0.0, ub=3.0, scm=3.0), _rec(1, scm=4.0, lb=2.0, ub=2.0)])
    assert row.lb_zero == 1 and row.TO == 0
    assert row.alpha_lb == 2.0


def test_failed_replications_count_as_timeouts():
    bad = _rec(1, scm=None, lb=None, ub=None, proof=None, t_scm=None, t_mip=None, error="boom")
    row = aggregate([_rec(0), bad])
    assert row.TO == 1 and row.completed == 1 and row.alpha_lb == 1.0


def test_report_shape_and_order():
    rows = [aggregate([_rec(0)])]
    csv_text, table = emit_report(rows)
    lines = csv_text.splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == COLUMNS
    assert lines[1] == "5,1,75.0000,1.0000,1.0000,1.0000,0.0000,0.0000,0.0000,0,0,1"
    assert table.splitlines()[0].split() == ["N", "m", "time%", "alpha_lb", "alpha_ub", "t_SCM", "time%std",
                                             "sigma_alpha_lb", "sigma_alpha_ub", "TO", "lb", "zero", "T"]
    shuffled = [dataclasses.replace(rows[0], N=n, m=m, T=t) for t, n, m in [(2, 5, 1), (1, 10, 2), (1, 5, 3), (1, 5, 1)]]
    keys = [tuple(int(x) for x in (l.split(",")[-1], l.split(",")[0], l.split(",")[1])) for l in emit_report(shuffled)[0].splitlines()[1:]]
    assert keys == [(1, 5, 1), (1, 5, 3), (1, 10, 2), (2, 5, 1)]
    with pytest.raises(ValueError):
        emit_report([])


def test_report_written_to_disk(tmp_path):
    path = tmp_path / "r.csv"
    text, _ = emit_report([aggregate([_rec(0)])], path)
    assert path.read_text() == text


def test_experiment_runs_and_validates():
    cfg = GenerationConfig("SYN-R1", N=4, T=2, m=2, rng_seed=1, replications=4)
    row, recs = run_experiment(cfg, WORK)
    assert len(recs) == 4 and row.replications == 4
    assert all(r.error is None and r.scm_valid and r.exact_valid for r in recs)
    for r in recs:
        assert r.exact_proof == "optimal"
        assert r.scm_objective / r.exact_upper >= 1 - 1e-9
    assert row.alpha_ub <= row.alpha_lb + 1e-12


def test_exhausted_limits_show_up_as_timeouts():
    cfg = GenerationConfig("SYN-R2", N=6, T=1, m=2, rng_seed=2, replications=3)
    row, recs = run_experiment(cfg, Limits(time_limit=None, node_limit=1, clock="work"))
    assert row.TO == 3 and row.alpha_lb is None
    for r in recs:
        assert r.exact_valid or r.error.startswith("SearchLimitError")


def test_single_replication_is_repeatable():
    cfg = GenerationConfig("SYN-R1", N=5, T=1, m=2, rng_seed=9, replications=1)
    assert run_experiment(cfg, WORK) == run_experiment(cfg, WORK)


def test_workers_do_not_change_results():
    cfg = GenerationConfig("SYN-R1", N=4, T=2, m=1, rng_seed=3, replications=4)
    assert run_experiment(cfg, WORK, workers=2) == run_experiment(cfg, WORK, workers=1)


def test_raw_records_replay_to_the_same_rows(tmp_path):
    cfgs = [GenerationConfig("SYN-R1", N=n, T=1, m=2, rng_seed=5, replications=3) for n in (3, 4)]
    raw = tmp_path / "raw.jsonl"
    rows, recs = run_suite(cfgs, WORK, raw_path=raw)
    back = read_records(raw)
    assert back == recs
    replayed = [aggregate(g, seed=5) for g in regroup(back)]
    assert replayed == rows
    assert emit_report(replayed)[0] == emit_report(rows)[0]


def test_wall_clock_mode_records_seconds():
    cfg = GenerationConfig("SYN-R1", N=3, T=1, m=1, rng_seed=0, replications=1)
    _, (rec,) = run_experiment(cfg, Limits(time_limit=30.0))
    assert rec.clock == "wall" and 0 <= rec.scm_time < 30 and 0 <= rec.exact_time < 30


def test_limits_validation():
    with pytest.raises(ValueError):
        Limits(clock="cpu")
    with pytest.raises(ValueError):
        Limits(time_limit=0)
