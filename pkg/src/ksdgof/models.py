"""Score-function models: Gaussian, Gaussian mixture and Gaussian-Bernoulli RBM.

Every model is exposed through :class:`ScoreModel`, whose ``score`` maps a
point (or an ``(n, d)`` batch) to the gradient of the log density.  The
parameter containers (``GaussianSpec``, ``GmmSpec``, ``GbRbmSpec``) are
immutable; :func:`perturb` returns new instances.

The RBM uses the joint ``exp(x'Bh + b'x + c'h - |x|^2/2)`` over
``h in {-1, +1}^d'``, so that ``x | h ~ N(Bh + b, I)`` and the score is
``b - x + B tanh(B'x + c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.special import log_softmax, logsumexp, ndtr

from .errors import (
    CapacityError,
    InvalidInputError,
    NumericalError,
    ParseError,
    UnsupportedOperationError,
)

MAX_ENUM_HIDDEN = 20
_LOG_2PI = math.log(2.0 * math.pi)

PERTURBATION_TARGETS = ("gmm-mean", "gmm-log-weight", "gmm-log-variance", "rbm-B")


def as_rng(rng):
    """Return a ``numpy.random.Generator`` from a generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    if x.ndim == 0:
        X = x.reshape(1, 1)
    elif x.ndim == 1 and dim == 1 and x.size != 1:
        # a flat array of scalars for a 1-D model is a batch of points
        X, single = x[:, None], False
    else:
        X = np.atleast_2d(x)
    if X.ndim != 2 or X.shape[1] != dim:
        raise InvalidInputError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return X, single


def _finish(out, single):
    return out[0] if single else out


# --------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidInputError(
                f"mean of length {mean.size} incompatible with covariance of shape {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidInputError("Gaussian parameters must be finite")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise InvalidInputError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError("covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self):
        return self.mean.size

    @cached_property
    def precision(self):
        eye = np.eye(self.dim)
        inv_chol = np.linalg.solve(self._chol, eye)
        return inv_chol.T @ inv_chol


@dataclass(frozen=True, eq=False)
class GmmSpec:
    """Mixture of isotropic Gaussians ``sum_k w_k N(mu_k, var_k I)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim <= 1:
            mu = mu.reshape(-1, 1)
        var = np.asarray(self.variances, dtype=float)
        if var.ndim == 0:
            var = np.full(w.size, float(var))
        if w.ndim != 1 or mu.shape[0] != w.size or var.shape != (w.size,):
            raise InvalidInputError(
                f"inconsistent mixture shapes: weights {w.shape}, means {mu.shape}, variances {var.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise InvalidInputError("mixture parameters must be finite")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("weights must be positive and sum to 1")
        if np.any(var <= 0):
            raise InvalidInputError("variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @classmethod
    def from_log_weights(cls, log_weights, means, variances):
        """Build a mixture from unnormalized log-weights."""
        return cls(np.exp(log_softmax(np.asarray(log_weights, dtype=float))), means, variances)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.weights.size


@dataclass(frozen=True, eq=False)
class GbRbmSpec:
    """Gaussian-Bernoulli RBM with coupling ``B`` (d x d'), visible bias ``b``, hidden bias ``c``."""

    B: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if B.ndim != 2 or B.shape != (b.size, c.size):
            raise InvalidInputError(
                f"B has shape {B.shape}, expected ({b.size}, {c.size}) from b and c"
            )
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise InvalidInputError("RBM parameters must be finite")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.b.size

    @property
    def n_hidden(self):
        return self.c.size

    @cached_property
    def log_partition(self):
        """Exact ``log Z`` of the joint by hidden-state enumeration."""
        _check_enumerable(self.n_hidden)
        acc = []
        for H in _hidden_state_chunks(self.n_hidden):
            acc.append(logsumexp(_hidden_log_marginal(self, H)))
        return 0.5 * self.dim * _LOG_2PI + float(logsumexp(acc))


@dataclass(frozen=True)
class PerturbationSpec:
    target: str
    magnitude: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.target not in PERTURBATION_TARGETS:
            raise InvalidInputError(
                f"unknown perturbation target {self.target!r}; expected one of {PERTURBATION_TARGETS}"
            )
        if not (self.magnitude >= 0 and math.isfinite(self.magnitude)):
            raise InvalidInputError("perturbation magnitude must be finite and >= 0")


# --------------------------------------------------------------------------
# the model interface


@dataclass(frozen=True, eq=False)
class ScoreModel:
    """A distribution known through its score function.

    ``score``, ``log_density_unnormalized`` and ``score_divergence`` take an
    ``(n, d)`` array and return ``(n, d)``, ``(n,)`` and ``(n,)`` arrays; use
    the methods of the same name (without the leading underscore) for
    single-point convenience.  ``sampler(rng, n)`` returns an ``(n, d)`` array.
    """

    dim: int
    score_fn: Callable[[np.ndarray], np.ndarray]
    label: str = "model"
    log_density_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    divergence_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_density_normalized: bool = False
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: object = field(default=None, repr=False)

    def score(self, x):
        X, single = _as_batch(x, self.dim)
        S = np.asarray(self.score_fn(X), dtype=float).reshape(X.shape)
        return _finish(S, single)

    @property
    def has_log_density(self):
        return self.log_density_fn is not None

    def log_density_unnormalized(self, x):
        if self.log_density_fn is None:
            raise UnsupportedOperationError(f"{self.label} has no log density")
        X, single = _as_batch(x, self.dim)
        return _finish(np.asarray(self.log_density_fn(X), dtype=float), single)

    def score_divergence(self, x):
        """Trace of the score Jacobian, with a central-difference fallback."""
        X, single = _as_batch(x, self.dim)
        if self.divergence_fn is not None:
            out = np.asarray(self.divergence_fn(X), dtype=float)
        else:
            out = score_divergence_fd(self, X)
        return _finish(out, single)


def score_divergence_fd(model, X, step=1e-5):
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[0])
    for j in range(model.dim):
        e = np.zeros(model.dim)
        e[j] = step
        out += (model.score(X + e)[:, j] - model.score(X - e)[:, j]) / (2 * step)
    return out


def custom_model(score, dim, label="custom", log_density=None, sampler=None):
    """Wrap a user-supplied batch score function."""
    return ScoreModel(
        dim=int(dim), score_fn=score, label=label, log_density_fn=log_density, sampler=sampler
    )


def sample_model(model, n, rng=None):
    """Draw ``n`` i.i.d. rows from ``model``; deterministic for a given seed."""
    if model.sampler is None:
        raise UnsupportedOperationError(f"{model.label} does not provide a sampler")
    if n < 1:
        raise InvalidInputError("sample size must be >= 1")
    return np.asarray(model.sampler(as_rng(rng), int(n)), dtype=float).reshape(int(n), model.dim)


# --------------------------------------------------------------------------
# Gaussian


def gaussian_score(spec, x):
    X, single = _as_batch(x, spec.dim)
    return _finish(-(X - spec.mean) @ spec.precision, single)


def gaussian_log_density(spec, x):
    X, single = _as_batch(x, spec.dim)
    z = np.linalg.solve(spec._chol, (X - spec.mean).T)
    logdet = 2.0 * np.log(np.diag(spec._chol)).sum()
    out = -0.5 * (z * z).sum(axis=0) - 0.5 * (spec.dim * _LOG_2PI + logdet)
    return _finish(out, single)


def gaussian_model(spec, label=None):
    def sampler(rng, n):
        return spec.mean + rng.standard_normal((n, spec.dim)) @ spec._chol.T

    cdf = None
    if spec.dim == 1:
        sd = math.sqrt(spec.cov[0, 0])
        mu = spec.mean[0]

        def cdf(t):
            return ndtr((np.asarray(t, dtype=float) - mu) / sd)

    tr = float(np.trace(spec.precision))
    return ScoreModel(
        dim=spec.dim,
        score_fn=lambda X: gaussian_score(spec, X),
        label=label or f"gaussian(d={spec.dim})",
        log_density_fn=lambda X: gaussian_log_density(spec, X),
        sampler=sampler,
        divergence_fn=lambda X: np.full(X.shape[0], -tr),
        log_density_normalized=True,
        cdf=cdf,
        spec=spec,
    )


def standard_normal_model(dim=1):
    return gaussian_model(GaussianSpec(np.zeros(dim), np.eye(dim)), label=f"normal(d={dim})")


# --------------------------------------------------------------------------
# Gaussian mixture


def _gmm_component_logits(spec, X):
    diff2 = ((X[:, None, :] - spec.means[None, :, :]) ** 2).sum(axis=2)
    return (
        np.log(spec.weights)
        - 0.5 * diff2 / spec.variances
        - 0.5 * spec.dim * np.log(2 * np.pi * spec.variances)
    )


def _gmm_responsibilities(spec, X):
    logits = _gmm_component_logits(spec, X)
    top = logits.max(axis=1)
    if not np.all(np.isfinite(top)):
        bad = int(np.flatnonzero(~np.isfinite(top))[0])
        raise NumericalError(f"all mixture responsibilities underflow at point index {bad}")
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def gmm_score(spec, x):
    X, single = _as_batch(x, spec.dim)
    R = _gmm_responsibilities(spec, X)
    # sum_k r_k (mu_k - x) / var_k
    S = (R / spec.variances) @ spec.means - X * (R / spec.variances).sum(axis=1, keepdims=True)
    return _finish(S, single)


def gmm_log_density(spec, x):
    X, single = _as_batch(x, spec.dim)
    return _finish(logsumexp(_gmm_component_logits(spec, X), axis=1), single)


def gmm_score_divergence(spec, x):
    X, single = _as_batch(x, spec.dim)
    R = _gmm_responsibilities(spec, X)
    A = (spec.means[None, :, :] - X[:, None, :]) / spec.variances[None, :, None]
    S = (R[:, :, None] * A).sum(axis=1)
    out = (
        -(R * spec.dim / spec.variances).sum(axis=1)
        + (R * (A**2).sum(axis=2)).sum(axis=1)
        - (S**2).sum(axis=1)
    )
    return _finish(out, single)


def gmm_cdf(spec, t):
    if spec.dim != 1:
        raise UnsupportedOperationError("mixture CDF is only defined for d = 1")
    t = np.asarray(t, dtype=float)
    z = (t[..., None] - spec.means[:, 0]) / np.sqrt(spec.variances)
    return (ndtr(z) * spec.weights).sum(axis=-1)


def gmm_model(spec, label=None):
    def sampler(rng, n):
        comp = rng.choice(spec.n_components, size=n, p=spec.weights)
        noise = rng.standard_normal((n, spec.dim))
        return spec.means[comp] + np.sqrt(spec.variances[comp])[:, None] * noise

    return ScoreModel(
        dim=spec.dim,
        score_fn=lambda X: gmm_score(spec, X),
        label=label or f"gmm(K={spec.n_components},d={spec.dim})",
        log_density_fn=lambda X: gmm_log_density(spec, X),
        sampler=sampler,
        divergence_fn=lambda X: gmm_score_divergence(spec, X),
        log_density_normalized=True,
        cdf=(lambda t: gmm_cdf(spec, t)) if spec.dim == 1 else None,
        spec=spec,
    )


# --------------------------------------------------------------------------
# Gaussian-Bernoulli RBM


def _check_enumerable(n_hidden):
    if n_hidden > MAX_ENUM_HIDDEN:
        raise CapacityError(
            f"exact enumeration needs d' <= {MAX_ENUM_HIDDEN} hidden units (got {n_hidden}); "
            "use estimate_log_z_ais for larger models"
        )


def _decode_states(codes, n_hidden):
    bits = (codes[:, None] >> np.arange(n_hidden)) & 1
    return 2.0 * bits - 1.0


def _hidden_state_chunks(n_hidden, chunk=1 << 14):
    total = 1 << n_hidden
    for start in range(0, total, chunk):
        yield _decode_states(np.arange(start, min(total, start + chunk), dtype=np.int64), n_hidden)


def _hidden_log_marginal(spec, H):
    # log of the x-integral of the joint at fixed h, minus (d/2) log 2pi
    m = H @ spec.B.T + spec.b
    return 0.5 * (m * m).sum(axis=1) + H @ spec.c


def gbrbm_hidden_log_probs(spec):
    """Normalized ``log p(h)`` for all ``2**d'`` states, indexed by bit code."""
    _check_enumerable(spec.n_hidden)
    lp = np.concatenate([_hidden_log_marginal(spec, H) for H in _hidden_state_chunks(spec.n_hidden)])
    return lp - logsumexp(lp)


def gbrbm_score(spec, x):
    X, single = _as_batch(x, spec.dim)
    S = spec.b - X + np.tanh(X @ spec.B + spec.c) @ spec.B.T
    return _finish(S, single)


def gbrbm_free_log_density(spec, x):
    """Unnormalized ``log p(x)`` with the hidden units summed out in closed form."""
    X, single = _as_batch(x, spec.dim)
    a = X @ spec.B + spec.c
    # log(2 cosh a), overflow-safe
    log2cosh = np.abs(a) + np.log1p(np.exp(-2 * np.abs(a)))
    out = X @ spec.b - 0.5 * (X * X).sum(axis=1) + log2cosh.sum(axis=1)
    return _finish(out, single)


def gbrbm_log_density_exact(spec, x):
    """Normalized ``log p(x)`` by brute-force enumeration of the hidden states."""
    _check_enumerable(spec.n_hidden)
    X, single = _as_batch(x, spec.dim)
    base = X @ spec.b - 0.5 * (X * X).sum(axis=1)
    XB = X @ spec.B
    parts = []
    for H in _hidden_state_chunks(spec.n_hidden):
        parts.append(logsumexp(XB @ H.T + H @ spec.c, axis=1))
    out = base + logsumexp(np.stack(parts, axis=1), axis=1) - spec.log_partition
    return _finish(out, single)


def gbrbm_score_divergence(spec, x):
    X, single = _as_batch(x, spec.dim)
    t = np.tanh(X @ spec.B + spec.c)
    out = -spec.dim + (1 - t * t) @ (spec.B * spec.B).sum(axis=0)
    return _finish(out, single)


def gbrbm_sample_exact(spec, n, rng=None):
    """Exact draws: ``h`` from the enumerated marginal, then ``x | h ~ N(Bh + b, I)``."""
    rng = as_rng(rng)
    lp = gbrbm_hidden_log_probs(spec)
    p = np.exp(lp)
    codes = rng.choice(p.size, size=n, p=p / p.sum())
    H = _decode_states(codes.astype(np.int64), spec.n_hidden)
    return H @ spec.B.T + spec.b + rng.standard_normal((n, spec.dim))


def gbrbm_model(spec, label=None):
    enumerable = spec.n_hidden <= MAX_ENUM_HIDDEN
    return ScoreModel(
        dim=spec.dim,
        score_fn=lambda X: gbrbm_score(spec, X),
        label=label or f"gbrbm(d={spec.dim},d'={spec.n_hidden})",
        log_density_fn=lambda X: gbrbm_free_log_density(spec, X),
        sampler=(lambda rng, n: gbrbm_sample_exact(spec, n, rng)) if enumerable else None,
        divergence_fn=lambda X: gbrbm_score_divergence(spec, X),
        spec=spec,
    )


def random_gbrbm(dim, n_hidden, rng=None, coupling="sign", scale=1.0):
    """Random RBM: ``b, c ~ N(0, 1)``; ``B`` uniform over ``{-scale, +scale}`` or ``N(0, scale^2)``."""
    rng = as_rng(rng)
    b = rng.standard_normal(dim)
    c = rng.standard_normal(n_hidden)
    if coupling == "sign":
        B = scale * rng.choice([-1.0, 1.0], size=(dim, n_hidden))
    elif coupling == "normal":
        B = scale * rng.standard_normal((dim, n_hidden))
    else:
        raise InvalidInputError(f"unknown coupling {coupling!r}")
    return GbRbmSpec(B, b, c)


def random_gmm(rng=None, n_components=5, low=0.0, high=10.0, variance=1.0):
    """Equal-weight 1-D mixture with means drawn uniformly from ``[low, high]``."""
    rng = as_rng(rng)
    means = rng.uniform(low, high, size=n_components)
    return GmmSpec(np.full(n_components, 1.0 / n_components), means, np.full(n_components, variance))


# --------------------------------------------------------------------------
# dispatch, perturbation, serialization


def as_model(obj, label=None):
    """Turn a spec (or an existing ScoreModel) into a ScoreModel."""
    if isinstance(obj, ScoreModel):
        return obj
    if isinstance(obj, GaussianSpec):
        return gaussian_model(obj, label)
    if isinstance(obj, GmmSpec):
        return gmm_model(obj, label)
    if isinstance(obj, GbRbmSpec):
        return gbrbm_model(obj, label)
    raise InvalidInputError(f"cannot build a model from {type(obj).__name__}")


def perturb(spec, pert, rng=None):
    """Return a copy of ``spec`` with N(0, magnitude^2) noise on the targeted parameters.

    ``gmm-log-weight`` renormalizes after the noise; ``gmm-log-variance``
    adds one shared draw to every component's log variance (the mixture
    shares a single sigma).
    """
    rng = as_rng(pert.rng_seed if rng is None else rng)
    s = float(pert.magnitude)
    if pert.target.startswith("gmm"):
        if not isinstance(spec, GmmSpec):
            raise InvalidInputError(f"target {pert.target!r} needs a GmmSpec, got {type(spec).__name__}")
        if pert.target == "gmm-mean":
            return GmmSpec(spec.weights, spec.means + s * rng.standard_normal(spec.means.shape), spec.variances)
        if pert.target == "gmm-log-weight":
            logw = np.log(spec.weights) + s * rng.standard_normal(spec.n_components)
            return GmmSpec.from_log_weights(logw, spec.means, spec.variances)
        shift = s * rng.standard_normal()
        return GmmSpec(spec.weights, spec.means, np.exp(np.log(spec.variances) + shift))
    if not isinstance(spec, GbRbmSpec):
        raise InvalidInputError(f"target 'rbm-B' needs a GbRbmSpec, got {type(spec).__name__}")
    return GbRbmSpec(spec.B + s * rng.standard_normal(spec.B.shape), spec.b, spec.c)


def spec_to_dict(spec):
    if isinstance(spec, GaussianSpec):
        return {"type": "gaussian", "mean": spec.mean.tolist(), "cov": spec.cov.tolist()}
    if isinstance(spec, GmmSpec):
        means = spec.means[:, 0].tolist() if spec.dim == 1 else spec.means.tolist()
        out = {"type": "gmm", "weights": spec.weights.tolist(), "means": means}
        if np.all(spec.variances == spec.variances[0]):
            out["variance"] = float(spec.variances[0])
        else:
            out["variances"] = spec.variances.tolist()
        return out
    if isinstance(spec, GbRbmSpec):
        return {"type": "gbrbm", "B": spec.B.tolist(), "b": spec.b.tolist(), "c": spec.c.tolist()}
    raise InvalidInputError(f"cannot serialize {type(spec).__name__}")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParseError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _vector(v, where):
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: expected a non-empty array of numbers")
    return np.array([_number(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _matrix(v, where):
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: expected a non-empty array of arrays")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(v)]
    for i, r in enumerate(rows):
        if r.size != rows[0].size:
            raise ParseError(f"{where}[{i}]: row has {r.size} entries, expected {rows[0].size}")
    return np.stack(rows)


def _vector_or_matrix(v, where):
    if isinstance(v, list) and v and isinstance(v[0], list):
        return _matrix(v, where)
    return _vector(v, where)


_SPEC_KEYS = {
    "gaussian": ({"mean", "cov"}, set()),
    "gmm": ({"weights", "means"}, {"variance", "variances"}),
    "gbrbm": ({"B", "b", "c"}, set()),
}


def spec_from_dict(d):
    """Validate a model-spec mapping and build the corresponding spec object."""
    if not isinstance(d, dict):
        raise ParseError("model spec: expected a JSON object")
    kind = d.get("type")
    if kind not in _SPEC_KEYS:
        raise ParseError(f"type: expected one of {sorted(_SPEC_KEYS)}, got {kind!r}")
    required, optional = _SPEC_KEYS[kind]
    for key in sorted(required):
        if key not in d:
            raise ParseError(f"{key}: missing required field for type {kind!r}")
    for key in sorted(set(d) - required - optional - {"type", "label"}):
        raise ParseError(f"{key}: unknown field for type {kind!r}")
    try:
        if kind == "gaussian":
            return GaussianSpec(_vector(d["mean"], "mean"), _matrix(d["cov"], "cov"))
        if kind == "gmm":
            if ("variance" in d) == ("variances" in d):
                raise ParseError("variance: exactly one of 'variance' or 'variances' is required")
            var = _number(d["variance"], "variance") if "variance" in d else _vector(d["variances"], "variances")
            return GmmSpec(_vector(d["weights"], "weights"), _vector_or_matrix(d["means"], "means"), var)
        return GbRbmSpec(_matrix(d["B"], "B"), _vector(d["b"], "b"), _vector(d["c"], "c"))
    except ParseError:
        raise
    except InvalidInputError as exc:
        raise ParseError(f"{kind}: {exc}") from exc
