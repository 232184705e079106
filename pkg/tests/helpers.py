"""Random instance generators shared by the test modules."""

import numpy as np

from imprex import CredalSet, FinitaryGamble, ImpreciseTree, StateSpace
from imprex.trees import count_vertex_trees

SPACES = {2: StateSpace("ab"), 3: StateSpace("abc")}


def random_credal_set(rng, d, max_vertices=3):
    k = int(rng.integers(1, max_vertices + 1))
    return CredalSet(rng.dirichlet(np.ones(d), size=k))


def random_tree(rng, d, depth, max_vertices=3):
    """Explicit imprecise tree with an independent random credal set per situation."""
    X = SPACES[d]
    models = {t: random_credal_set(rng, d, max_vertices)
              for length in range(depth) for t in X.situations(length)}
    return ImpreciseTree.explicit(X, models, depth)


def random_gamble(rng, X, horizon, low=-1.0, high=1.0):
    return FinitaryGamble(X, rng.uniform(low, high, size=(X.size,) * horizon))


def random_instance(rng, max_trees=50_000, max_horizon=4):
    """(P, f, s) with ``len(s) < horizon`` and at most ``max_trees`` vertex trees below ``s``.

    Oversized draws are redrawn.
    """
    while True:
        d = int(rng.choice([2, 3]))
        n = int(rng.integers(1, max_horizon + 1))
        P = random_tree(rng, d, n)
        k = int(rng.integers(0, n))
        s = tuple(int(x) for x in rng.integers(0, d, size=k))
        if count_vertex_trees(P, s, n) <= max_trees:
            return P, random_gamble(rng, P.space, n), s
