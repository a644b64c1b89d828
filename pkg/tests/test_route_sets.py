import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_instance
from drfsp.route_sets import ContractError, construct_route_sets
from drfsp.routing import RoutePool, generate_routes
from worked_example import A, B


def test_worked_example_sets_and_order(worked):
    pool = generate_routes(worked)
    col = construct_route_sets(pool, worked)
    r = {key: routes for key, routes in pool.routes.items()}
    sets = list(col)
    assert [s.set_id for s in sets] == ["1:0", "1:1", "2:0"]
    assert sets[0].members == (r[(A, 0)][0], r[(A, 1)][0])
    assert sets[1].members == (r[(A, 0)][1], r[(A, 1)][0])
    assert sets[2].members == (r[(B, 0)][0], r[(B, 1)][0])
    assert col.dump().splitlines() == [
        "S[1:0] k=0: {2, 4, 8}; k=1: {1, 5, 9}",
        "S[1:1] k=0: {3}; k=1: {1, 5, 9}",
        "S[2:0] k=0: {7, 8}; k=1: {2, 4, 5, 9}",
    ]


def test_single_scenario_sets_are_the_routes():
    inst = make_instance(12, 1, 1, seed=4)
    pool = generate_routes(inst)
    col = construct_route_sets(pool, inst)
    assert [s.members[0] for s in col] == sorted(pool.get(1, 0), key=lambda r: (-len(r), min(r.entry_ids)))


def test_type_without_entries_gets_no_sets():
    inst = make_instance(3, 8, 1, seed=2)
    pool = generate_routes(inst)
    col = construct_route_sets(pool, inst)
    for t in inst.type_ids:
        if not inst.scenarios[0].compatible(t):
            assert col.by_type[t] == ()


def test_missing_pool_entry_is_a_contract_error():
    inst = make_instance(3, 2, 2, seed=1)
    pool = generate_routes(inst)
    del pool.routes[(2, 1)]
    with pytest.raises(ContractError):
        construct_route_sets(pool, inst)


def test_incomplete_pool_is_a_contract_error():
    inst = make_instance(4, 1, 1, seed=1)
    pool = generate_routes(inst)
    broken = RoutePool({key: routes[1:] for key, routes in pool.routes.items()})
    with pytest.raises(ContractError):
        construct_route_sets(broken, inst)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.sampled_from([1, 2, 4]), st.integers(1, 4), st.integers(0, 10**6))
def test_sets_cover_everything_within_bound(N, T, m, seed):
    inst = make_instance(N, T, m, seed)
    pool = generate_routes(inst)
    col = construct_route_sets(pool, inst)
    for t in inst.type_ids:
        sets = col.by_type[t]
        assert len(sets) <= max(len(sc.compatible(t)) for sc in inst.scenarios)
        assert len(sets) <= max(len(pool.get(t, sc.index)) for sc in inst.scenarios)
        for sc in inst.scenarios:
            got = set().union(*(s.covered[sc.index] for s in sets)) if sets else set()
            assert got == {e.entry_id for e in sc.compatible(t)}
            for s in sets:
                assert len(s.members) == inst.m
                assert s.members[sc.index].scenario == sc.index
                assert s.members[sc.index].agent_type == t
