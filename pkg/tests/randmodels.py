"""Random model generation shared by the property and acceptance suites."""

import numpy as np

from aomdd.model import GraphicalModel, make_factor


def random_model(rng, n_range=(4, 14), ks=(2, 3), max_arity=3, zero_fraction=0.3,
                 n_factors=None, mixed_domains=True):
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    if mixed_domains:
        domains = tuple(int(k) for k in rng.choice(ks, size=n))
    else:
        k = int(rng.choice(ks))
        domains = (k,) * n
    if n_factors is None:
        n_factors = int(rng.integers(n // 2 + 1, n + 4))
    factors = []
    for _ in range(n_factors):
        arity = int(rng.integers(1, max_arity + 1))
        scope = [int(v) for v in rng.choice(n, size=min(arity, n), replace=False)]
        size = int(np.prod([domains[v] for v in scope]))
        table = rng.uniform(0.1, 2.0, size=size)
        table[rng.random(size) < zero_fraction] = 0.0
        factors.append(make_factor(scope, table, domains))
    return GraphicalModel(domains, tuple(factors))


def cap_size(model, cap=3 ** 12):
    return int(np.prod(model.domains)) <= cap
