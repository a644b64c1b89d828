import json
from pathlib import Path

import pytest

import worked_example
from drfsp.cli import main
from drfsp.instance import write_instance

CONFIG = "source_instance=SYN-R1\nN=3,4\nT=1\nm=2\nreplications=2\nrng_seed=6\n"


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "suite.cfg"
    path.write_text(CONFIG)
    return path


@pytest.fixture
def example_file(tmp_path):
    return write_instance(worked_example.build(), tmp_path / "worked.drfsp")


def test_generate_writes_one_file_per_replication(cfg, tmp_path, capsys):
    out = tmp_path / "inst"
    assert main(["--quiet", "generate", str(cfg), "--out", str(out)]) == 0
    files = sorted(out.glob("*.drfsp"))
    assert len(files) == 4
    printed = capsys.readouterr().out.split()
    assert sorted(printed) == [str(p) for p in files]
    assert [Path(p).name.split("-")[2] for p in printed] == ["3", "3", "4", "4"]


def test_solve_validate_round_trip(example_file, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    assert main(["--quiet", "solve-scm", str(example_file), "--out", str(plan)]) == 0
    assert capsys.readouterr().out.startswith("z = 3")
    assert main(["--quiet", "validate", str(example_file), str(plan)]) == 0
    assert capsys.readouterr().out.startswith("OK")
    data = json.loads(plan.read_text())
    data["objective"] = 2.0
    plan.write_text(json.dumps(data))
    assert main(["--quiet", "validate", str(example_file), str(plan)]) == 1
    assert "objective mismatch" in capsys.readouterr().out


def test_solve_exact_and_lp_export(example_file, tmp_path, capsys):
    lp = tmp_path / "m.lp"
    assert main(["--quiet", "solve-exact", str(example_file), "--supply", "3", "--lp", str(lp)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("z = 3") and "bounds: [3, 3] (optimal)" in out
    assert lp.read_text().startswith("Minimize")


def test_oracle(example_file, capsys, tmp_path):
    small = write_instance(worked_example.build(supply=3), tmp_path / "w3.drfsp")
    assert main(["--quiet", "oracle", str(example_file)]) == 2  # 10 entries is too many
    assert main(["--quiet", "oracle", str(small)]) == 2
    inst_dir = tmp_path / "gen"
    cfg = tmp_path / "one.cfg"
    cfg.write_text("source_instance=SYN-R1\nN=2\nT=1\nm=2\nreplications=1\n")
    main(["--quiet", "generate", str(cfg), "--out", str(inst_dir)])
    capsys.readouterr()
    (f,) = inst_dir.glob("*.drfsp")
    assert main(["--quiet", "oracle", str(f)]) == 0
    assert capsys.readouterr().out.startswith("z = ")


def test_bench_outputs(cfg, tmp_path):
    out = tmp_path / "bench"
    assert main(["--quiet", "bench", str(cfg), "--out", str(out), "--clock", "work"]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == "N,m,time%,alpha_lb,alpha_ub,t_SCM,time%std,sigma_alpha_lb,sigma_alpha_ub,TO,lb zero,T"
    assert len(lines) == 3
    assert len((out / "raw.jsonl").read_text().splitlines()) == 4
    assert (out / "results.txt").exists()


def test_environment_overrides(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("DRFSP_CLOCK", "work")
    monkeypatch.setenv("DRFSP_REPLICATIONS", "1")
    out = tmp_path / "b"
    assert main(["--quiet", "bench", str(cfg), "--out", str(out)]) == 0
    recs = [json.loads(l) for l in (out / "raw.jsonl").read_text().splitlines()]
    assert len(recs) == 2 and all(r["clock"] == "work" for r in recs)
    # an explicit flag beats the environment
    assert main(["--quiet", "bench", str(cfg), "--out", str(out), "--replications", "2"]) == 0
    assert len((out / "raw.jsonl").read_text().splitlines()) == 4
    monkeypatch.setenv("DRFSP_CLOCK", "sundial")
    assert main(["--quiet", "bench", str(cfg), "--out", str(out)]) == 2


def test_json_lines_log(example_file, tmp_path):
    log = tmp_path / "log.jsonl"
    assert main(["--log", str(log), "solve-scm", str(example_file)]) == 0
    events = [json.loads(l) for l in log.read_text().splitlines()]
    assert events[-1]["event"] == "scm" and events[-1]["z"] == 3.0 and events[-1]["valid"] is True


def test_exit_codes_for_bad_input(tmp_path, capsys):
    assert main([]) == 2
    assert main(["solve-scm", str(tmp_path / "missing.drfsp")]) == 2
    bad = tmp_path / "bad.drfsp"
    bad.write_text("[CUSTOMERS]\n0 0 0\n")
    assert main(["--quiet", "solve-scm", str(bad)]) == 2
    assert main(["--quiet", "solve-exact", str(bad), "--node-limit", "0"]) == 2


def test_infeasible_instance_exits_one(tmp_path):
    from drfsp.instance import AgentType, DrfspInstance, Scenario, SolomonCustomer, TimetableEntry

    cust = (SolomonCustomer(0, 0, 0, 0, 0, 1000, 0), SolomonCustomer(1, 100, 0, 0, 0, 50, 1))
    e = TimetableEntry(1, 1, 0.0, 50.0, 1.0, frozenset({1}))
    path = write_instance(DrfspInstance("far", cust, (AgentType(1, 1.0),), (Scenario(0, (e,), 2.0),)), tmp_path / "far.drfsp")
    assert main(["--quiet", "solve-scm", str(path)]) == 1
    assert main(["--quiet", "solve-exact", str(path)]) == 1
