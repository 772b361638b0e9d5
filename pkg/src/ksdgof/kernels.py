"""RBF kernel with the derivative terms the Stein kernel needs, and the median heuristic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateSampleError, InvalidInputError


class KernelDerivatives(NamedTuple):
    value: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    cross_trace: float


@dataclass(frozen=True)
class RbfKernel:
    """``k(x, y) = exp(-|x - y|^2 / (2 h^2))`` with bandwidth ``h``."""

    bandwidth: float

    def __post_init__(self):
        h = float(self.bandwidth)
        if not (h > 0 and math.isfinite(h)):
            raise InvalidInputError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", h)

    def __call__(self, x, y):
        return rbf_eval(self, x, y).value

    def gram(self, X, Y=None):
        X = _as_rows(X)
        Y = X if Y is None else _as_rows(Y)
        if X.shape[1] != Y.shape[1]:
            raise InvalidInputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        D2 = cdist(X, Y, "sqeuclidean")
        return np.exp(-D2 / (2.0 * self.bandwidth**2))


def _as_rows(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def rbf_eval(kernel, x, y):
    """Value, both gradients and ``trace(d^2 k / dx dy)`` at one pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError(f"points must be equal-length vectors, got {x.shape} and {y.shape}")
    h2 = kernel.bandwidth**2
    diff = y - x
    r2 = float(diff @ diff)
    k = math.exp(-r2 / (2.0 * h2))
    grad_x = k * diff / h2
    return KernelDerivatives(
        value=k,
        grad_x=grad_x,
        grad_y=-grad_x,
        cross_trace=k * (x.size / h2 - r2 / h2**2),
    )


def median_bandwidth(sample):
    """Lower median of the pairwise Euclidean distances of ``sample``.

    Zero distances (duplicate points) are ignored as long as at least one
    positive distance exists.
    """
    X = _as_rows(sample)
    if X.shape[0] < 2:
        raise InvalidInputError("median bandwidth needs at least two points")
    dist = pdist(X)
    dist = dist[dist > 0]
    if dist.size == 0:
        raise DegenerateSampleError("all sample points are identical; no positive distance")
    k = (dist.size - 1) // 2
    return float(np.partition(dist, k)[k])
