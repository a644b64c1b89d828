import math
import os
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_instance
from drfsp.instance import (
    DEFAULT_COMPATIBILITY,
    AgentType,
    DrfspInstance,
    GenerationConfig,
    InstanceError,
    Scenario,
    SolomonCustomer,
    SolomonParseError,
    TimetableEntry,
    format_config,
    format_instance,
    format_solomon,
    generate_instance,
    load_source,
    parse_config,
    parse_instance,
    parse_solomon,
    read_instance,
    synthetic_solomon,
    write_instance,
)

TINY = """TINY

VEHICLE
NUMBER     CAPACITY
  25         200

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

    0      35         35          0          0        230          0
    1      41         49         10        161        171         10
    2      35         17          7         50         60         10
"""


def test_parse_solomon_reads_rows_in_order():
    inst = parse_solomon(TINY)
    assert inst.name == "TINY"
    assert (inst.vehicle_count, inst.capacity) == (25, 200)
    assert [c.id for c in inst.customers] == [0, 1, 2]
    assert inst.depot.due_date == 230
    assert inst.customers[1] == SolomonCustomer(1, 41, 49, 10, 161, 171, 10)
    assert [c.id for c in inst.pool()] == [1, 2]


def test_solomon_round_trip():
    inst = parse_solomon(TINY)
    assert parse_solomon(format_solomon(inst)) == inst
    syn = synthetic_solomon("R2", n=30, seed=4)
    assert parse_solomon(format_solomon(syn)) == syn


@pytest.mark.parametrize(
    "mutate, line",
    [
        (lambda t: t.replace("    2      35         17", "    2      35         x7"), 12),
        (lambda t: t.replace("  25         200", "  25"), 5),
        (lambda t: t.replace("CUSTOMER\n", "CLIENTS\n"), 7),
        (lambda t: t.replace("    1      41", "    0      41"), 11),
        (lambda t: t.replace("161        171", "181        171"), 11),
    ],
)
def test_solomon_errors_carry_line_numbers(mutate, line):
    with pytest.raises(SolomonParseError) as info:
        parse_solomon(mutate(TINY))
    assert info.value.line == line


def test_solomon_without_depot_is_rejected():
    text = "\n".join(ln for ln in TINY.splitlines() if not ln.strip().startswith("0 "))
    with pytest.raises(SolomonParseError, match="depot"):
        parse_solomon(text)


def test_synthetic_sources_are_reachable_and_deterministic():
    for kind in ("R1", "R2"):
        a, b = synthetic_solomon(kind), synthetic_solomon(kind)
        assert a == b and len(a.pool()) == 100
        d = a.depot
        for c in a.pool():
            assert math.hypot(c.x - d.x, c.y - d.y) <= c.due_date
            assert c.ready_time <= c.due_date
    with pytest.raises(InstanceError):
        synthetic_solomon("C1")


def _entry(eid, cust=1, types=(1,), e=0.0, l=100.0):
    return TimetableEntry(eid, cust, e, l, 1.0, frozenset(types))


def _customers(*ids):
    return tuple(SolomonCustomer(i, float(i), 0.0, 0.0, 0.0, 1000.0, 0.0) for i in (0,) + ids)


def test_instance_validation():
    types = (AgentType(1, 1.0),)
    ok = DrfspInstance("x", _customers(1), types, (Scenario(0, (_entry(1),), 2.0),))
    assert ok.m == 1 and ok.T == 1 and ok.W == 1
    assert ok.travel_time(0, 1) == 1.0
    with pytest.raises(InstanceError, match="unknown customer"):
        DrfspInstance("x", _customers(1), types, (Scenario(0, (_entry(1, cust=5),), 2.0),))
    with pytest.raises(InstanceError, match="unknown type"):
        DrfspInstance("x", _customers(1), types, (Scenario(0, (_entry(1, types=(2,)),), 2.0),))
    with pytest.raises(InstanceError, match="depot"):
        DrfspInstance("x", _customers(1)[1:], types, (Scenario(0, (_entry(1),), 2.0),))
    with pytest.raises(InstanceError):
        Scenario(0, (_entry(1),), 1.0)
    with pytest.raises(InstanceError):
        Scenario(0, (_entry(1), _entry(1)), 2.0)
    with pytest.raises(InstanceError):
        _entry(1, types=())
    with pytest.raises(InstanceError):
        _entry(0)
    with pytest.raises(InstanceError):
        AgentType(1, 0.0)


def test_matrix_must_be_symmetric_and_complete():
    types = (AgentType(1, 1.0),)
    sc = (Scenario(0, (_entry(1),), 2.0),)
    with pytest.raises(InstanceError, match="asymmetric"):
        DrfspInstance("x", _customers(1), types, sc, matrix={(0, 1): 3.0, (1, 0): 4.0})
    with pytest.raises(InstanceError, match="lacks"):
        DrfspInstance("x", _customers(1, 2), types, sc, matrix={(0, 1): 3.0})
    half = DrfspInstance("x", _customers(1), types, sc, matrix={(0, 1): 3.0})
    assert half.travel_time(1, 0) == 3.0


@given(st.lists(st.tuples(st.integers(0, 70), st.integers(0, 70)), min_size=2, max_size=8))
def test_euclidean_travel_is_symmetric_and_metric(points):
    cust = tuple(SolomonCustomer(i, float(x), float(y), 0, 0, 100, 0) for i, (x, y) in enumerate(points))
    inst = DrfspInstance("p", cust, (AgentType(1, 1.0),), (Scenario(0, (), 2.0),))
    ids = range(len(points))
    for a in ids:
        assert inst.travel_time(a, a) == 0
        for b in ids:
            assert inst.travel_time(a, b) == inst.travel_time(b, a)
            for c in ids:
                assert inst.travel_time(a, c) <= inst.travel_time(a, b) + inst.travel_time(b, c) + 1e-9


def test_generation_invariants():
    cfg = GenerationConfig("SYN-R1", N=7, T=4, m=3, rng_seed=11)
    src = load_source("SYN-R1")
    inst = generate_instance(cfg, src, seed=5)
    assert inst.m == 3 and inst.T == 4 and inst.type_ids == [1, 2, 3, 4]
    used = set()
    for sc in inst.scenarios:
        assert [e.entry_id for e in sc.entries] == list(range(1, 8))
        assert sc.sigma == 2.0
        for e in sc.entries:
            c = inst.customer(e.customer)
            assert (e.ready, e.due, e.service) == (c.ready_time, c.due_date, c.service_time)
            assert e.types and e.types <= {1, 2, 3, 4}
            used.add(e.customer)
    assert {c.id for c in inst.customers} == used | {0}
    assert inst.horizon == src.depot.due_date


def test_generation_is_deterministic_per_seed():
    cfg = GenerationConfig("SYN-R2", N=10, T=2, m=2, rng_seed=1)
    src = load_source("SYN-R2")
    a, b = generate_instance(cfg, src, 99), generate_instance(cfg, src, 99)
    assert format_instance(a) == format_instance(b)
    assert format_instance(a) != format_instance(generate_instance(cfg, src, 100))
    assert cfg.replication_seed(0) != cfg.replication_seed(1)
    assert cfg.replication_seed(3) == GenerationConfig("SYN-R1", N=1, T=1, m=1, rng_seed=1).replication_seed(3)


def test_compatibility_defaults_follow_type_count():
    for T, p in DEFAULT_COMPATIBILITY.items():
        assert GenerationConfig("SYN-R1", N=1, T=T, m=1).compatibility_prob == p
    with pytest.raises(InstanceError):
        GenerationConfig("SYN-R1", N=1, T=3, m=1)
    assert GenerationConfig("SYN-R1", N=1, T=3, m=1, compatibility_prob=0.5).compatibility_prob == 0.5


def test_full_compatibility_gives_every_type():
    inst = make_instance(6, 4, 2, seed=3, compatibility_prob=1.0)
    assert all(e.types == {1, 2, 3, 4} for sc in inst.scenarios for e in sc.entries)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.sampled_from([1, 2, 4, 8]), st.integers(1, 3), st.integers(0, 2**32))
def test_instance_file_round_trip(N, T, m, seed):
    inst = make_instance(N, T, m, seed, source="SYN-R2")
    back = parse_instance(format_instance(inst))
    assert back == inst
    assert format_instance(back) == format_instance(inst)


def test_instance_file_round_trip_with_matrix_and_supply(worked, tmp_path):
    inst = worked.with_supply(3)
    path = write_instance(inst, tmp_path / "w.drfsp")
    back = read_instance(path)
    assert back == inst and back.agent_supply == 3
    assert all(back.travel_time(a, b) == inst.travel_time(a, b) for (a, b) in inst.matrix)


def test_bad_instance_file_reports_line():
    text = format_instance(make_instance(3, 1, 1, 0)).replace("[TYPES]\n1 1", "[TYPES]\n1 one")
    with pytest.raises(InstanceError, match="line"):
        parse_instance(text)


def test_config_grid_order_and_round_trip():
    cfgs = parse_config("source_instance=SYN-R1\nN=10,5\nT=2,1\nm=3,1\nrng_seed=4\nsigma=3\n# comment\n")
    assert [(c.T, c.N, c.m) for c in cfgs] == [
        (1, 5, 1), (1, 5, 3), (1, 10, 1), (1, 10, 3), (2, 5, 1), (2, 5, 3), (2, 10, 1), (2, 10, 3)
    ]
    assert all(c.sigma == 3.0 and c.rng_seed == 4 for c in cfgs)
    assert parse_config(format_config(cfgs[3])) == [cfgs[3]]
    with pytest.raises(InstanceError):
        parse_config("source_instance=SYN-R1\nN=3\nT=1\n")
    with pytest.raises(InstanceError):
        parse_config("source_instance=SYN-R1\nN=3\nT=1\nm=1\ncolour=red\n")


SOLOMON_DIR = os.environ.get("DRFSP_SOLOMON_DIR")


@pytest.mark.skipif(
    not SOLOMON_DIR or not any(Path(SOLOMON_DIR).glob("[rR]101.txt")), reason="R101 data not available"
)
def test_real_r101_file():
    inst = load_source("R101", SOLOMON_DIR)
    assert len(inst.customers) == 101
    assert (inst.depot.x, inst.depot.y, inst.depot.due_date) == (35, 35, 230)
    c1 = inst.customers[1]
    assert (c1.x, c1.y, c1.demand, c1.ready_time, c1.due_date, c1.service_time) == (41, 49, 10, 161, 171, 10)
