"""Stein operator, Stein kernel and the KSD estimators built on it.

For an RBF kernel with bandwidth ``h`` the Stein kernel of a model with
score ``s`` is::

    u(x, y) = k(x, y) * ( s(x)'s(y) + s(x)'(x - y)/h^2 + (y - x)'s(y)/h^2
                          + d/h^2 - |x - y|^2/h^4 )

which is what :func:`u_q`, :class:`SteinKernel` and :func:`build_gram`
evaluate.  All Gram-level code caches the scores once per point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CapacityError, InvalidInputError, NumericalError
from .kernels import RbfKernel, median_bandwidth, rbf_eval
from .models import ScoreModel

DEFAULT_MAX_GRAM_BYTES = 2 * 1024**3
ESTIMATOR_KINDS = ("U", "V", "linear")


def as_sample(sample, dim=None):
    X = np.asarray(sample, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if dim in (None, 1) else X[None, :]
    if X.ndim != 2:
        raise InvalidInputError(f"sample must be an (n, d) array, got shape {np.shape(sample)}")
    if dim is not None and X.shape[1] != dim:
        raise InvalidInputError(f"sample has dimension {X.shape[1]}, model expects {dim}")
    return X


def resolve_kernel(kernel, sample):
    """``None`` or ``"median"`` selects the median heuristic on ``sample``."""
    if kernel is None or (isinstance(kernel, str) and kernel == "median"):
        return RbfKernel(median_bandwidth(sample))
    if isinstance(kernel, RbfKernel):
        return kernel
    return RbfKernel(float(kernel))


def _scores(score, X):
    S = score.score(X) if isinstance(score, ScoreModel) else np.asarray(score(X), dtype=float)
    S = S.reshape(X.shape)
    bad = ~np.all(np.isfinite(S), axis=1)
    if bad.any():
        raise NumericalError(f"non-finite score at point index {int(np.flatnonzero(bad)[0])}")
    return S


# --------------------------------------------------------------------------
# Stein operator


def stein_apply(model, f, x):
    """Apply the Stein operator ``s(x) f(x) + grad f(x)`` of ``model``.

    ``f(X)`` receives an ``(n, d)`` array and returns ``(values, gradients)``
    of shapes ``(n,)`` and ``(n, d)``.  ``x`` may be one point or a batch.
    """
    X = as_sample(x, model.dim)
    single = np.ndim(x) <= 1 and X.shape[0] == 1
    val, grad = f(X)
    val = np.asarray(val, dtype=float).reshape(-1)
    grad = np.asarray(grad, dtype=float).reshape(X.shape)
    out = _scores(model, X) * val[:, None] + grad
    return out[0] if single else out


def constant_function(X):
    X = np.asarray(X)
    return np.ones(X.shape[0]), np.zeros(X.shape)


def coordinate_function(j):
    def f(X):
        X = np.asarray(X)
        g = np.zeros(X.shape)
        g[:, j] = 1.0
        return X[:, j], g

    return f


def kernel_slice(kernel, x0):
    """``x -> k(x, x0)`` with its gradient, as a Stein test function."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def f(X):
        X = np.asarray(X, dtype=float)
        h2 = kernel.bandwidth**2
        diff = x0 - X
        k = np.exp(-(diff * diff).sum(axis=1) / (2 * h2))
        return k, k[:, None] * diff / h2

    return f


def stein_kernel_feature(model, kernel, x, y):
    """``s(x) k(x, y) + grad_x k(x, y)``: the Stein operator applied to ``k(., y)`` at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kd = rbf_eval(kernel, x, y)
    return _scores(model, x[None, :])[0] * kd.value + kd.grad_x


# --------------------------------------------------------------------------
# Stein kernel


def u_q(model, kernel, x, y):
    """Stein kernel of ``model`` at one pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (model.dim,) or y.shape != (model.dim,):
        raise InvalidInputError(f"points must have dimension {model.dim}")
    sx, sy = _scores(model, np.stack([x, y]))
    kd = rbf_eval(kernel, x, y)
    return float(
        kd.value * (sx @ sy) + sx @ kd.grad_y + kd.grad_x @ sy + kd.cross_trace
    )


def _stein_block(X, Y, SX, SY, h):
    h2 = h * h
    D2 = cdist(X, Y, "sqeuclidean")
    K = np.exp(-D2 / (2 * h2))
    t1 = SX @ SY.T
    t2 = ((SX * X).sum(axis=1)[:, None] - SX @ Y.T) / h2
    t3 = ((SY * Y).sum(axis=1)[None, :] - X @ SY.T) / h2
    t4 = X.shape[1] / h2 - D2 / (h2 * h2)
    return K * (t1 + t2 + t3 + t4)


def stein_kernel_pairs(model, kernel, X, Y):
    """Row-wise ``u(X[i], Y[i])`` for equal-length batches."""
    X = as_sample(X, model.dim)
    Y = as_sample(Y, model.dim)
    if X.shape != Y.shape:
        raise InvalidInputError("pairwise evaluation needs batches of equal shape")
    SX, SY = _scores(model, X), _scores(model, Y)
    h2 = kernel.bandwidth**2
    diff = X - Y
    r2 = (diff * diff).sum(axis=1)
    k = np.exp(-r2 / (2 * h2))
    return k * (
        (SX * SY).sum(axis=1)
        + (SX * diff).sum(axis=1) / h2
        - (diff * SY).sum(axis=1) / h2
        + X.shape[1] / h2
        - r2 / h2**2
    )


@dataclass(frozen=True, eq=False)
class SteinKernel:
    """The Stein kernel as a two-argument kernel object (usable wherever a Gram is needed)."""

    model: ScoreModel
    kernel: RbfKernel

    def __call__(self, x, y):
        return u_q(self.model, self.kernel, x, y)

    def gram(self, X, Y=None):
        X = as_sample(X, self.model.dim)
        SX = _scores(self.model, X)
        if Y is None:
            return _stein_block(X, X, SX, SX, self.kernel.bandwidth)
        Y = as_sample(Y, self.model.dim)
        return _stein_block(X, Y, SX, _scores(self.model, Y), self.kernel.bandwidth)


@dataclass(frozen=True, eq=False)
class SteinGram:
    matrix: np.ndarray
    model_label: str
    bandwidth: float

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def diag_mean(self):
        return float(np.mean(np.diag(self.matrix)))


def build_gram(model, kernel, sample, max_bytes=DEFAULT_MAX_GRAM_BYTES):
    """Materialize the ``n x n`` Stein-kernel Gram matrix of ``sample``.

    The upper triangle is computed and mirrored so the result is exactly
    symmetric.  Raises :class:`CapacityError` when the working memory
    (about six ``n x n`` float arrays) would exceed ``max_bytes``.
    """
    X = as_sample(sample, model.dim)
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("the Stein Gram matrix needs n >= 2")
    if 6 * 8 * n * n > max_bytes:
        raise CapacityError(
            f"Gram matrix for n={n} needs about {6 * 8 * n * n / 2**20:.0f} MiB "
            f"(cap {max_bytes / 2**20:.0f} MiB); use linear_statistic instead"
        )
    kernel = resolve_kernel(kernel, X)
    S = _scores(model, X)
    G = _stein_block(X, X, S, S, kernel.bandwidth)
    G = np.triu(G) + np.triu(G, 1).T
    if not np.all(np.isfinite(G)):
        raise NumericalError("non-finite entries in the Stein Gram matrix")
    return SteinGram(G, model.label, kernel.bandwidth)


# --------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class KsdEstimate:
    value: float
    estimator_kind: str
    n: int
    plugin_variance: Optional[float] = None


def u_statistic(gram):
    """Unbiased estimate: mean of the off-diagonal Gram entries."""
    G = gram.matrix
    n = G.shape[0]
    if n < 2:
        raise InvalidInputError("the U-statistic needs n >= 2")
    value = (G.sum() - np.trace(G)) / (n * (n - 1))
    return KsdEstimate(float(value), "U", n)


def v_statistic(gram):
    """Biased, nonnegative estimate: mean of all Gram entries."""
    G = gram.matrix
    return KsdEstimate(float(G.mean()), "V", G.shape[0])


def linear_statistic(model, kernel, sample):
    """Average of ``u(x_{2i-1}, x_{2i})`` over consecutive disjoint pairs, in sample order."""
    X = as_sample(sample, model.dim)
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("the linear statistic needs n >= 2")
    kernel = resolve_kernel(kernel, X)
    m = n // 2
    terms = stein_kernel_pairs(model, kernel, X[0 : 2 * m : 2], X[1 : 2 * m : 2])
    var = float(np.var(terms, ddof=1)) if m > 1 else None
    return KsdEstimate(float(terms.mean()), "linear", n, var)


def ksd_two_score(score_p, score_q, kernel, sample):
    """V-statistic of ``delta(x)' k(x, x') delta(x')`` with ``delta = s_q - s_p``.

    Needs the score of the sampling distribution too, so it is a diagnostic,
    not a test statistic.
    """
    X = as_sample(sample)
    kernel = resolve_kernel(kernel, X)
    delta = _scores(score_q, X) - _scores(score_p, X)
    # quadratic form of a PSD matrix; clip rounding below zero
    return max(float(np.mean(kernel.gram(X) * (delta @ delta.T))), 0.0)


# --------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True, eq=False)
class SpectralNull:
    eigenvalues: np.ndarray
    n: int


def gram_eigenvalues(gram, tol=1e-8):
    """Eigenvalues of ``Gram / n`` in nonincreasing order, tolerance-clipped at 0."""
    n = gram.n
    if n < 2:
        raise InvalidInputError("spectral approximation needs n >= 2")
    try:
        ev = np.linalg.eigvalsh(gram.matrix / n)[::-1]
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigensolver did not converge") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("non-finite eigenvalues")
    top = max(ev[0], 0.0)
    if ev[-1] < -tol * top:
        raise NumericalError(
            f"Stein Gram matrix is not positive semidefinite: min eigenvalue {ev[-1]:.3e}, max {top:.3e}"
        )
    return SpectralNull(np.clip(ev, 0.0, None), n)
