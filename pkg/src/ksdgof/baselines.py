"""Comparison methods: MMD two-sample test, likelihood-ratio oracle, RBM Gibbs
sampling and AIS, the 1-D Kolmogorov-Smirnov test, and Fisher-divergence
statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp
from scipy.stats import kstwobign

from .errors import InvalidInputError, NumericalError, UnsupportedOperationError
from .gof_tests import TestReport, _check_alpha, decide, smoothed_p_value
from .kernels import RbfKernel, median_bandwidth
from .models import GbRbmSpec, ScoreModel, as_rng, gbrbm_log_density_exact
from .stein import _scores, as_sample


# --------------------------------------------------------------------------
# MMD


@dataclass(frozen=True)
class MmdEstimate:
    value: float
    nx: int
    ny: int


def _mmd_from_gram(K, nx, biased=False):
    # exactly rounded sums make the result independent of which sample comes first
    Kxx, Kyy, Kxy = K[:nx, :nx], K[nx:, nx:], K[:nx, nx:]
    ny = K.shape[0] - nx
    total = lambda A: math.fsum(A.ravel())  # noqa: E731
    if biased:
        return math.fsum([total(Kxx) / nx**2, total(Kyy) / ny**2, -2 * total(Kxy) / (nx * ny)])
    sxx = (total(Kxx) - math.fsum(np.diag(Kxx))) / (nx * (nx - 1))
    syy = (total(Kyy) - math.fsum(np.diag(Kyy))) / (ny * (ny - 1))
    return math.fsum([sxx, syy, -2 * total(Kxy) / (nx * ny)])


def mmd_u_statistic(kernel, sample_x, sample_y, biased=False):
    """Squared MMD estimate.

    The default U-statistic drops the ``i = j`` within-sample terms and can
    be negative; ``biased=True`` gives the V-statistic (all terms).
    ``kernel`` is any object with a ``gram(X, Y)`` method.
    """
    X, Y = as_sample(sample_x), as_sample(sample_y)
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"samples have dimensions {X.shape[1]} and {Y.shape[1]}")
    nx, ny = X.shape[0], Y.shape[0]
    if not biased and (nx < 2 or ny < 2):
        raise InvalidInputError("the MMD U-statistic needs at least two points per sample")
    K = kernel.gram(np.vstack([X, Y]))
    return MmdEstimate(float(_mmd_from_gram(K, nx, biased)), nx, ny)


def mmd_bootstrap_test(kernel, sample_x, sample_y, alpha=0.05, m=1000, seed=0):
    """Two-sample MMD test with a permutation null.

    Each replicate re-partitions the pooled sample into groups of the
    original sizes.  ``kernel=None`` uses the median heuristic on the
    pooled sample.
    """
    _check_alpha(alpha)
    X, Y = as_sample(sample_x), as_sample(sample_y)
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"samples have dimensions {X.shape[1]} and {Y.shape[1]}")
    nx, ny = X.shape[0], Y.shape[0]
    if nx < 2 or ny < 2:
        raise InvalidInputError("each sample needs at least two points")
    Z = np.vstack([X, Y])
    rule = "median of pooled sample" if kernel is None or kernel == "median" else "fixed"
    if rule != "fixed":
        kernel = RbfKernel(median_bandwidth(Z))
    elif not hasattr(kernel, "gram"):
        kernel = RbfKernel(float(kernel))
    K = kernel.gram(Z)
    stat = float(_mmd_from_gram(K, nx))

    rng = np.random.default_rng(seed)
    N = nx + ny
    order = rng.random((m, N)).argsort(axis=1)
    P = np.zeros((m, N))
    np.put_along_axis(P, order[:, :nx], 1.0, axis=1)
    Q = 1.0 - P
    diag = np.diag(K)
    PK, QK = P @ K, Q @ K
    sxx = ((PK * P).sum(axis=1) - P @ diag) / (nx * (nx - 1))
    syy = ((QK * Q).sum(axis=1) - Q @ diag) / (ny * (ny - 1))
    sxy = (PK * Q).sum(axis=1) / (nx * ny)
    reps = sxx + syy - 2 * sxy
    p = smoothed_p_value(stat, reps)
    return TestReport(
        method="mmd-bootstrap",
        statistic=stat,
        p_value=p,
        threshold=float(np.quantile(reps, 1 - alpha)),
        alpha=alpha,
        decision=decide(p, alpha),
        n=nx,
        replicates=m,
        bandwidth=getattr(kernel, "bandwidth", None),
        seed=seed,
        model_label="two-sample",
        metadata={"ny": ny, "null": "pooled re-partition", "bandwidth_rule": rule},
    )


# --------------------------------------------------------------------------
# likelihood ratio oracle


def exact_log_density(model, X):
    """Normalized log density, by closed form or hidden-state enumeration."""
    if isinstance(model.spec, GbRbmSpec):
        return gbrbm_log_density_exact(model.spec, X)
    if model.has_log_density and model.log_density_normalized:
        return model.log_density_unnormalized(X)
    raise UnsupportedOperationError(f"{model.label} has no exact normalized log density")


def lr_oracle_test(model_p, model_q, sample, alpha=0.05):
    """Simple-vs-simple oracle using ``2 * sum_i [log q(x_i) - log p(x_i)]``.

    The sample is attributed to ``model_q`` (retain) when the statistic is
    ``>= 0`` and to ``model_p`` (reject) otherwise; identical models always
    retain.  ``alpha`` is recorded but does not enter the decision.
    """
    _check_alpha(alpha)
    X = as_sample(sample, model_q.dim)
    stat = 2.0 * float(np.sum(exact_log_density(model_q, X) - exact_log_density(model_p, X)))
    return TestReport(
        method="lr-oracle",
        statistic=stat,
        p_value=None,
        threshold=0.0,
        alpha=alpha,
        decision="reject" if stat < 0 else "retain",
        n=X.shape[0],
        replicates=None,
        bandwidth=None,
        seed=None,
        model_label=model_q.label,
        metadata={"alternative_label": model_p.label},
    )


# --------------------------------------------------------------------------
# RBM Gibbs sampling and AIS


def _gibbs_sweep(spec, x, rng, beta=1.0):
    ph = expit(2.0 * (beta * (x @ spec.B) + spec.c))
    h = np.where(rng.random(ph.shape) < ph, 1.0, -1.0)
    x = beta * (h @ spec.B.T) + spec.b + rng.standard_normal(x.shape)
    return x, h


def gibbs_chains(spec, steps, burn_in, rng=None, num_chains=1, thin=1, x0=None):
    """Blocked Gibbs for the RBM: ``h | x`` then ``x | h ~ N(Bh + b, I)``.

    Returns an array of shape ``(steps, num_chains, d)`` holding the
    post-burn-in states, one row per recorded sweep.  Chains start from
    ``x0`` or from ``x | h`` with ``h`` uniform on ``{-1, +1}^d'``.
    """
    if steps < 1 or burn_in < 0 or thin < 1:
        raise InvalidInputError("need steps >= 1, burn_in >= 0 and thin >= 1")
    rng = as_rng(rng)
    if x0 is None:
        h = rng.choice([-1.0, 1.0], size=(num_chains, spec.n_hidden))
        x = h @ spec.B.T + spec.b + rng.standard_normal((num_chains, spec.dim))
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (num_chains, spec.dim)))
    for _ in range(burn_in):
        x, _h = _gibbs_sweep(spec, x, rng)
    out = np.empty((steps, num_chains, spec.dim))
    for t in range(steps):
        for _ in range(thin):
            x, _h = _gibbs_sweep(spec, x, rng)
        out[t] = x
    return out


def gibbs_sampler(spec, steps, burn_in, rng=None, thin=1, x0=None):
    """``steps`` consecutive states of one Gibbs chain as an ``(steps, d)`` array."""
    return gibbs_chains(spec, steps, burn_in, rng, 1, thin, x0)[:, 0, :]


@dataclass(frozen=True)
class AisResult:
    log_z_estimate: float
    num_temperatures: int
    num_chains: int
    stderr_of_log_weights: float
    log_z_stderr: float

    def to_dict(self):
        return {
            "log_z": self.log_z_estimate,
            "stderr": self.log_z_stderr,
            "temps": self.num_temperatures,
            "chains": self.num_chains,
        }


def rbm_base_log_z(spec):
    """``log Z`` of the RBM with ``B = 0``."""
    a = np.abs(spec.c)
    return (
        0.5 * spec.dim * math.log(2 * math.pi)
        + 0.5 * float(spec.b @ spec.b)
        + float(np.sum(a + np.log1p(np.exp(-2 * a))))
    )


def estimate_log_z_ais(spec, num_temps=1000, num_chains=100, rng=None):
    """Annealed importance sampling estimate of the RBM log partition function.

    The path scales the coupling term ``x'Bh`` by ``beta`` on a linear grid
    from 0 (the factorized ``B = 0`` model, exact draws and known ``Z``) to
    1, with one Gibbs sweep per temperature.
    """
    if num_temps < 2:
        raise InvalidInputError("AIS needs at least two temperatures")
    rng = as_rng(rng)
    betas = np.linspace(0.0, 1.0, num_temps)
    x = spec.b + rng.standard_normal((num_chains, spec.dim))
    h = np.where(rng.random((num_chains, spec.n_hidden)) < expit(2.0 * spec.c), 1.0, -1.0)
    logw = np.zeros(num_chains)
    for t in range(1, num_temps):
        logw += (betas[t] - betas[t - 1]) * np.einsum("ij,jk,ik->i", x, spec.B, h)
        x, h = _gibbs_sweep(spec, x, rng, betas[t])
    bad = ~np.isfinite(logw)
    if bad.any():
        raise NumericalError(f"non-finite AIS log-weight in chain {int(np.flatnonzero(bad)[0])}")
    log_mean = float(logsumexp(logw) - math.log(num_chains))
    w = np.exp(logw - logw.max())
    rel_se = float(w.std(ddof=1) / (w.mean() * math.sqrt(num_chains))) if num_chains > 1 else math.inf
    return AisResult(
        log_z_estimate=rbm_base_log_z(spec) + log_mean,
        num_temperatures=num_temps,
        num_chains=num_chains,
        stderr_of_log_weights=float(logw.std(ddof=1) / math.sqrt(num_chains)) if num_chains > 1 else math.inf,
        log_z_stderr=rel_se,
    )


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_test_1d(cdf, sample, alpha=0.05):
    """One-sample KS test with the asymptotic Kolmogorov p-value.

    ``cdf`` is a callable or a :class:`ScoreModel` that carries one.
    """
    _check_alpha(alpha)
    label = "cdf"
    if isinstance(cdf, ScoreModel):
        if cdf.cdf is None:
            raise UnsupportedOperationError(f"{cdf.label} has no CDF (only 1-D models do)")
        label, cdf = cdf.label, cdf.cdf
    x = np.asarray(sample, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise UnsupportedOperationError("the KS test is defined for 1-D samples only")
        x = x[:, 0]
    x = np.sort(x)
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    p = float(kstwobign.sf(math.sqrt(n) * D))
    return TestReport(
        method="ks",
        statistic=D,
        p_value=p,
        threshold=float(kstwobign.isf(alpha) / math.sqrt(n)),
        alpha=alpha,
        decision=decide(p, alpha),
        n=n,
        replicates=None,
        bandwidth=None,
        seed=None,
        model_label=label,
        metadata={"p_value": "asymptotic Kolmogorov"},
    )


# --------------------------------------------------------------------------
# Fisher divergence


def fisher_partial_statistic(model, sample):
    """Sample mean of ``|s_q(x)|^2 + 2 trace(grad s_q(x))``.

    Its expectation under ``p`` is ``F(p, q) - E_p |s_p|^2``.
    """
    X = as_sample(sample, model.dim)
    S = _scores(model, X)
    return float(np.mean((S * S).sum(axis=1) + 2.0 * model.score_divergence(X)))


def fisher_divergence_two_score(score_p, score_q, sample):
    """Monte Carlo ``E_p |s_p(x) - s_q(x)|^2`` when both scores are known."""
    X = as_sample(sample)
    delta = _scores(score_q, X) - _scores(score_p, X)
    return float(np.mean((delta * delta).sum(axis=1)))
