"""Command line entry point: ``drfsp <command> ...``.

Every flag can also come from the environment as ``DRFSP_<FLAG>`` (dashes
become underscores, e.g. ``DRFSP_TIME_LIMIT``); an explicit flag wins.
Exit codes: 0 success, 1 infeasible instance or failed validation, 2 usage
or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .bench import CLOCKS, Limits, emit_report, run_suite
from .exact import SearchLimitError, solve_exact
from .instance import (
    InfeasibleInstanceError,
    InstanceError,
    SolomonParseError,
    generate_instance,
    load_source,
    read_config,
    read_instance,
    write_instance,
)
from .milp import write_lp
from .oracle import drfsp_optimum
from .plan import dumps_plan, plan_from_dict, validate_plan
from .scm import DEFAULT_DRWSC_NODE_LIMIT, run_scm

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ENV_PREFIX = "DRFSP_"
ORACLE_MAX_ENTRIES = 8

log = logging.getLogger("drfsp")


class _JsonLines(logging.Formatter):
    def format(self, record):
        out = {"ts": round(record.created, 3), "level": record.levelname.lower(), "event": record.getMessage()}
        out.update(getattr(record, "fields", {}))
        return json.dumps(out, sort_keys=True)


def _event(msg, **fields):
    log.info(msg, extra={"fields": fields})


class UsageError(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drfsp", description="Demand-robust fleet sizing with the set-cover-mapping heuristic.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log", metavar="FILE", help="append JSON-lines log here instead of stderr")
    p.add_argument("--quiet", action="store_true", help="no log output")
    sub = p.add_subparsers(dest="command", required=True)

    def limits(sp, node_default):
        sp.add_argument("--time-limit", type=_positive_float, help="seconds")
        sp.add_argument("--node-limit", type=_positive_int, default=node_default)

    g = sub.add_parser("generate", help="config file -> instance files")
    g.add_argument("config")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="override rng_seed")
    g.add_argument("--sigma", type=float, help="override sigma")
    g.add_argument("--replications", type=_positive_int)
    g.add_argument("--solomon-dir")

    s = sub.add_parser("solve-scm", help="instance -> heuristic plan")
    s.add_argument("instance")
    s.add_argument("--phi", type=float, default=0.5)
    s.add_argument("--out", help="write the plan as JSON")
    limits(s, DEFAULT_DRWSC_NODE_LIMIT)

    e = sub.add_parser("solve-exact", help="instance -> exact plan")
    e.add_argument("instance")
    e.add_argument("--supply", type=_positive_int, help="agent supply P (default: from the instance)")
    e.add_argument("--out", help="write the plan as JSON")
    e.add_argument("--lp", metavar="FILE", help="also write the MILP in LP format")
    limits(e, 5_000_000)

    v = sub.add_parser("validate", help="check a plan against an instance")
    v.add_argument("instance")
    v.add_argument("plan")

    b = sub.add_parser("bench", help="config -> CSV report")
    b.add_argument("config")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--seed", type=int, help="override rng_seed")
    b.add_argument("--sigma", type=float, help="override sigma")
    b.add_argument("--phi", type=float, help="override phi")
    b.add_argument("--replications", type=_positive_int)
    b.add_argument("--time-limit", type=_positive_float, default=600.0, help="exact solver seconds")
    b.add_argument("--node-limit", type=_positive_int, default=5_000_000, help="exact solver nodes")
    b.add_argument("--scm-node-limit", type=_positive_int, default=DEFAULT_DRWSC_NODE_LIMIT)
    b.add_argument("--clock", choices=CLOCKS, default="wall")
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--solomon-dir")

    o = sub.add_parser("oracle", help="tiny instance -> enumerated optimum")
    o.add_argument("instance")
    return p


def _apply_env(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: List[str]) -> None:
    """Fill options not given on the command line from DRFSP_* variables."""
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    given = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    for action in sp._actions:
        if not action.option_strings or action.dest == "help":
            continue
        flag = action.option_strings[-1]
        env = ENV_PREFIX + flag.lstrip("-").upper().replace("-", "_")
        if flag in given or env not in os.environ:
            continue
        raw = os.environ[env]
        try:
            value = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{env}={raw!r}: {exc}") from None
        if action.choices and value not in action.choices:
            raise UsageError(f"{env}={raw!r}: choose from {list(action.choices)}")
        setattr(args, action.dest, value)


def _configs(args):
    cfgs = read_config(args.config)
    over = {}
    for key in ("seed", "sigma", "phi", "replications"):
        val = getattr(args, key, None)
        if val is not None:
            over["rng_seed" if key == "seed" else key] = val
    return [dataclasses.replace(c, **over) for c in cfgs] if over else cfgs


def _write_plan(plan, path):
    if path:
        Path(path).write_text(dumps_plan(plan) + "\n", encoding="utf-8")


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in _configs(args):
        source = load_source(cfg.source_instance, args.solomon_dir)
        for rep in range(cfg.replications):
            inst = generate_instance(cfg, source, cfg.replication_seed(rep))
            path = write_instance(inst, out / f"{inst.name}.drfsp")
            _event("generated", path=str(path), N=cfg.N, T=cfg.T, m=cfg.m, rep=rep)
            print(path)
    return EXIT_OK


def cmd_solve_scm(args) -> int:
    inst = read_instance(args.instance)
    res = run_scm(inst, args.phi, args.node_limit, args.time_limit)
    rep = validate_plan(res.plan, inst)
    _event("scm", instance=inst.name, z=res.plan.objective, proof=res.plan.proof, valid=rep.ok, **res.timing)
    print(res.plan.dump())
    _write_plan(res.plan, args.out)
    if not rep.ok:
        print(rep, file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_solve_exact(args) -> int:
    inst = read_instance(args.instance)
    if args.supply is not None:
        inst = inst.with_supply(args.supply)
    if args.lp:
        write_lp(inst, args.lp)
    t0 = time.perf_counter()
    plan = solve_exact(inst, args.node_limit, args.time_limit)
    elapsed = time.perf_counter() - t0
    rep = validate_plan(plan, inst)
    _event(
        "exact",
        instance=inst.name,
        z=plan.objective,
        lower_bound=plan.lower_bound,
        proof=plan.proof,
        nodes=plan.nodes_explored,
        seconds=elapsed,
        valid=rep.ok,
    )
    print(plan.dump())
    print(f"bounds: [{plan.lower_bound:g}, {plan.upper_bound:g}] ({plan.proof})")
    _write_plan(plan, args.out)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_validate(args) -> int:
    inst = read_instance(args.instance)
    try:
        data = json.loads(Path(args.plan).read_text(encoding="utf-8"))
        plan = plan_from_dict(data, inst)
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise UsageError(f"{args.plan}: not a plan for this instance ({exc})") from None
    rep = validate_plan(plan, inst)
    _event("validate", instance=inst.name, ok=rep.ok, violations=len(rep.violations))
    print(rep)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    limits = Limits(args.time_limit, args.node_limit, args.scm_node_limit, args.clock)
    rows, records = run_suite(_configs(args), limits, args.workers, args.solomon_dir, out / "raw.jsonl")
    for r in records:
        if r.error:
            _event("replication failed", name=r.name, rep=r.rep, seed=r.seed, error=r.error)
    csv_text, table = emit_report(rows, out / "results.csv")
    (out / "results.txt").write_text(table, encoding="utf-8")
    _event("bench", rows=len(rows), runs=len(records), out=str(out))
    print(table, end="")
    bad = [r for r in records if r.scm_valid is False or r.exact_valid is False]
    return EXIT_FAIL if bad else EXIT_OK


def cmd_oracle(args) -> int:
    inst = read_instance(args.instance)
    total = sum(len(sc.entries) for sc in inst.scenarios)
    if total > ORACLE_MAX_ENTRIES:
        raise UsageError(f"oracle enumerates at most {ORACLE_MAX_ENTRIES} entries, instance has {total}")
    z = drfsp_optimum(inst)
    _event("oracle", instance=inst.name, z=z)
    print(f"z = {z:g}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve-scm": cmd_solve_scm,
    "solve-exact": cmd_solve_exact,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "oracle": cmd_oracle,
}


def _setup_logging(args):
    log.handlers.clear()
    log.propagate = False
    if args.quiet:
        log.addHandler(logging.NullHandler())
        return
    handler = logging.FileHandler(args.log, encoding="utf-8") if args.log else logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLines())
    log.addHandler(handler)
    log.setLevel(logging.INFO)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        _apply_env(parser, args, argv)
        _setup_logging(args)
        return COMMANDS[args.command](args)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SearchLimitError as exc:
        print(f"no plan: {exc} (lower bound {exc.lower_bound:g})", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, InstanceError, SolomonParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
