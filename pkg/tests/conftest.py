import functools

import pytest

import worked_example
from drfsp.instance import GenerationConfig, generate_instance, load_source


@functools.lru_cache(maxsize=None)
def _source(name):
    return load_source(name)


def make_instance(N, T, m, seed, source="SYN-R1", **kw):
    cfg = GenerationConfig(source, N=N, T=T, m=m, rng_seed=seed, **kw)
    return generate_instance(cfg, _source(source), seed)


@pytest.fixture
def worked():
    return worked_example.build()


def random_drwsc(rng, max_sets=6, max_elements=8, max_m=3, sigmas=(1.5, 2.0, 3.0)):
    """A random well-posed instance: every scenario element lies in some set."""
    from drfsp.drwsc import DrwscInstance

    u = rng.randint(1, max_elements)
    m = rng.randint(1, max_m)
    universe = list(range(u))
    scenarios = [frozenset(e for e in universe if rng.random() < 0.6) for _ in range(m)]
    n = rng.randint(1, max_sets)
    sets = [set(e for e in universe if rng.random() < 0.4) for _ in range(n)]
    for a in scenarios:
        for e in a:
            if not any(e in s for s in sets):
                rng.choice(sets).add(e)
    costs = [rng.choice([1, 1, 2, 3, 4.5]) for _ in range(n)]
    return DrwscInstance.from_subsets(scenarios, sets, costs, [rng.choice(sigmas) for _ in range(m)])
