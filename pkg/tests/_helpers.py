"""Shared oracles for the test suite."""

import numpy as np

from ksdgof.models import (
    GaussianSpec,
    GmmSpec,
    as_model,
    random_gbrbm,
)


def central_grad(f, X, step=1e-5):
    """Central-difference gradient of a batch scalar function ``f: (n, d) -> (n,)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    G = np.empty_like(X)
    for j in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[j] = step
        G[:, j] = (f(X + e) - f(X - e)) / (2 * step)
    return G


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def builtin_specs(seed=0):
    """One instance of every built-in model family, small enough to enumerate."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    return {
        "gaussian": GaussianSpec(rng.standard_normal(3), A @ A.T + 0.5 * np.eye(3)),
        "gmm-1d": GmmSpec(np.full(5, 0.2), rng.uniform(0, 10, 5), np.ones(5)),
        "gmm-2d": GmmSpec([0.3, 0.7], rng.standard_normal((2, 2)), [0.8, 1.5]),
        "gbrbm": random_gbrbm(4, 3, rng, coupling="normal", scale=0.5),
    }
