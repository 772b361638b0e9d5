"""Error-rate benchmark harness and the score finite-difference check.

A benchmark sweeps perturbation magnitude and sample size.  In every trial
a fair coin decides whether the candidate model ``q`` equals the true model
``p`` (null) or is a perturbed copy (alternative); a sample of size ``n`` is
drawn from ``p`` and every configured method tests ``H0: sample ~ q``.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import exact_log_density, gibbs_sampler, ks_test_1d, lr_oracle_test, mmd_bootstrap_test
from .errors import KsdError, ParseError, UnsupportedOperationError
from .gof_tests import _jsonable, ksd_bootstrap_test, ksd_linear_test, ksd_spectral_test
from .models import (
    GbRbmSpec,
    PerturbationSpec,
    as_model,
    as_rng,
    perturb,
    random_gbrbm,
    random_gmm,
    sample_model,
    spec_to_dict,
)

FAMILIES = {"gmm": "gmm-mean", "gbrbm": "rbm-B"}
_METHOD_RE = re.compile(r"^(ksd-bootstrap|ksd-linear|ksd-spectral|lr-oracle|ks)$|^(mmd-mc|mmd-mcmc)\((\d+)\)$")

CSV_COLUMNS = (
    "family", "target", "method", "sigma_per", "n", "trials", "failed",
    "error_rate", "type1_rate", "type2_rate",
)


def parse_method(name):
    """Split ``"mmd-mc(100)"`` into ``("mmd-mc", 100)``; plain names get ``None``."""
    m = _METHOD_RE.match(name)
    if not m:
        raise ParseError(f"methods: unknown method {name!r}")
    if m.group(1):
        return m.group(1), None
    return m.group(2), int(m.group(3))


@dataclass
class ExperimentConfig:
    family: str
    sigmas: list
    n_sweep: list = field(default_factory=lambda: [100])
    methods: list = field(default_factory=lambda: ["ksd-bootstrap", "ksd-linear"])
    trials: int = 1000
    alpha: float = 0.05
    bootstrap_m: int = 1000
    master_seed: int = 0
    target: str = ""
    bandwidth: object = "median"
    model_mode: str = "fixed"
    design: str = "coin"
    mcmc_burn_in: int = 1000
    mcmc_thin: int = 1
    linear_scale: str = "mean"
    rbm_dim: int = 50
    rbm_hidden: int = 10
    gmm_components: int = 5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParseError(f"family: expected one of {sorted(FAMILIES)}, got {self.family!r}")
        if not self.target:
            self.target = FAMILIES[self.family]
        try:
            PerturbationSpec(self.target, 0.0)
        except KsdError as exc:
            raise ParseError(f"target: {exc}") from None
        if self.target.startswith("gmm") != (self.family == "gmm"):
            raise ParseError(f"target: {self.target!r} does not apply to family {self.family!r}")
        if not self.sigmas or any(not isinstance(s, (int, float)) or s < 0 for s in self.sigmas):
            raise ParseError("sigmas: expected a non-empty list of numbers >= 0")
        if not self.n_sweep or any(not isinstance(n, int) or n < 4 for n in self.n_sweep):
            raise ParseError("n_sweep: expected a non-empty list of integers >= 4")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ParseError("trials: expected an integer >= 1")
        if not 0 < self.alpha < 1:
            raise ParseError("alpha: expected a number in (0, 1)")
        if self.bootstrap_m < 100:
            raise ParseError("bootstrap_m: expected an integer >= 100")
        if self.model_mode not in ("fixed", "per-trial"):
            raise ParseError("model_mode: expected 'fixed' or 'per-trial'")
        if self.design not in ("coin", "null", "alternative"):
            raise ParseError("design: expected 'coin', 'null' or 'alternative'")
        if not (self.bandwidth == "median" or (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0)):
            raise ParseError("bandwidth: expected 'median' or a positive number")
        if not self.methods:
            raise ParseError("methods: expected a non-empty list")
        for name in self.methods:
            kind, _ = parse_method(name)
            if kind == "mmd-mcmc" and self.family != "gbrbm":
                raise ParseError(f"methods: {name!r} needs a Gibbs sampler (family 'gbrbm')")
            if kind == "ks" and self.family != "gmm":
                raise ParseError(f"methods: {name!r} is only available for the 1-D family 'gmm'")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ParseError("config: expected a JSON object")
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ParseError(f"{key}: unknown configuration field")
        for key in ("family", "sigmas"):
            if key not in d:
                raise ParseError(f"{key}: missing required field")
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", exc.lineno) from None
        return cls.from_dict(d)


def _seed(*keys):
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def draw_true_spec(config, rng):
    if config.family == "gmm":
        return random_gmm(rng, n_components=config.gmm_components)
    return random_gbrbm(config.rbm_dim, config.rbm_hidden, rng)


def _run_method(name, p_spec, q_spec, x, config, seed):
    kind, size = parse_method(name)
    p_model, q_model = as_model(p_spec), as_model(q_spec)
    bw = None if config.bandwidth == "median" else float(config.bandwidth)
    if kind == "ksd-bootstrap":
        return ksd_bootstrap_test(q_model, bw, x, config.alpha, config.bootstrap_m, seed)
    if kind == "ksd-linear":
        return ksd_linear_test(q_model, bw, x, config.alpha, config.linear_scale)
    if kind == "ksd-spectral":
        return ksd_spectral_test(q_model, bw, x, config.alpha, 10 * config.bootstrap_m, seed)
    if kind == "lr-oracle":
        return lr_oracle_test(p_model, q_model, x, config.alpha)
    if kind == "ks":
        return ks_test_1d(q_model, x, config.alpha)
    rng = np.random.default_rng(seed)
    if kind == "mmd-mc":
        y = sample_model(q_model, size, rng)
    else:
        if not isinstance(q_spec, GbRbmSpec):
            raise UnsupportedOperationError("mmd-mcmc needs an RBM model")
        y = gibbs_sampler(q_spec, size, config.mcmc_burn_in, rng, thin=config.mcmc_thin)
    return mmd_bootstrap_test(None, x, y, config.alpha, config.bootstrap_m, _seed(seed, 1))


def run_trial(config, p_spec, sigma, n, trial_seed):
    """One trial: choose the hypothesis, build ``q``, sample from ``p``, run every method."""
    rng = np.random.default_rng(trial_seed)
    if config.design == "coin":
        alternative = bool(rng.integers(2))
    else:
        alternative = config.design == "alternative"
    if alternative:
        q_spec = perturb(p_spec, PerturbationSpec(config.target, sigma), rng)
    else:
        q_spec = p_spec
    x = sample_model(as_model(p_spec), n, rng)
    record = {
        "seed": trial_seed,
        "sigma_per": sigma,
        "n": n,
        "hypothesis": "H1" if alternative else "H0",
        "q_spec": spec_to_dict(q_spec) if alternative else None,
        "results": {},
    }
    for k, name in enumerate(config.methods):
        try:
            rep = _run_method(name, p_spec, q_spec, x, config, _seed(trial_seed, k))
        except KsdError as exc:
            record["results"][name] = {"status": "error", "error": str(exc)}
            continue
        record["results"][name] = {
            "status": "ok",
            "decision": rep.decision,
            "statistic": rep.statistic,
            "p_value": rep.p_value,
            "correct": rep.rejected == alternative,
        }
    return record


def summarize(config, records):
    """Aggregate trial records into one row per (method, sigma, n)."""
    rows = []
    cells = {}
    for r in records:
        cells.setdefault((r["sigma_per"], r["n"]), []).append(r)
    for (sigma, n), recs in cells.items():
        for name in config.methods:
            ok = [r for r in recs if r["results"][name]["status"] == "ok"]
            null = [r for r in ok if r["hypothesis"] == "H0"]
            alt = [r for r in ok if r["hypothesis"] == "H1"]
            rej = lambda rs: sum(r["results"][name]["decision"] == "reject" for r in rs)  # noqa: E731
            rows.append({
                "family": config.family,
                "target": config.target,
                "method": name,
                "sigma_per": sigma,
                "n": n,
                "trials": len(ok),
                "failed": len(recs) - len(ok),
                "error_rate": (sum(not r["results"][name]["correct"] for r in ok) / len(ok)) if ok else None,
                "type1_rate": rej(null) / len(null) if null else None,
                "type2_rate": (len(alt) - rej(alt)) / len(alt) if alt else None,
            })
    return rows


def iter_trials(config):
    """Yield trial records in (cell, trial) order; fully determined by ``master_seed``."""
    fixed_spec = draw_true_spec(config, np.random.default_rng(_seed(config.master_seed, 0)))
    cell = 0
    for sigma in config.sigmas:
        for n in config.n_sweep:
            cell += 1
            for t in range(config.trials):
                trial_seed = _seed(config.master_seed, cell, t)
                if config.model_mode == "fixed":
                    p_spec = fixed_spec
                else:
                    p_spec = draw_true_spec(config, np.random.default_rng(_seed(trial_seed, 99)))
                record = run_trial(config, p_spec, float(sigma), int(n), trial_seed)
                record = {"cell": cell, "trial": t, **record}
                if config.model_mode == "per-trial":
                    record["p_spec"] = spec_to_dict(p_spec)
                yield record


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_benchmark(config, out_dir):
    """Run the sweep and write ``error_rates.csv``, ``trials.ndjson`` and ``experiment.json``.

    Returns the summary rows.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.load(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    with open(out / "trials.ndjson", "w") as fh:
        for rec in iter_trials(config):
            records.append(rec)
            fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
    rows = summarize(config, records)
    with open(out / "error_rates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    p_spec = draw_true_spec(config, np.random.default_rng(_seed(config.master_seed, 0)))
    meta = {
        "config": asdict(config),
        "true_model": spec_to_dict(p_spec) if config.model_mode == "fixed" else None,
        "bandwidth_rule": "median pairwise distance (distances, not squared)"
        if config.bandwidth == "median" else "fixed",
        "mmd_null": "pooled re-partition, bandwidth by median of pooled sample",
    }
    (out / "experiment.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return rows


def rejection_rates(config):
    """Rejection rate of every method in every (sigma, n) cell, keyed by ``(method, sigma, n)``."""
    out = {}
    counts = {}
    for rec in iter_trials(config):
        for name, res in rec["results"].items():
            if res["status"] != "ok":
                continue
            key = (name, rec["sigma_per"], rec["n"])
            tot, rej = counts.get(key, (0, 0))
            counts[key] = (tot + 1, rej + (res["decision"] == "reject"))
    for key, (tot, rej) in counts.items():
        out[key] = rej / tot
    return out


# --------------------------------------------------------------------------
# score check


def score_check(model, points=100, seed=0, tol=1e-4, step=1e-5):
    """Compare the analytic score with central differences of the log density.

    The discrepancy at a point is ``|s - s_fd| / max(1, |s_fd|)`` (Euclidean
    norms); the check passes when its maximum over ``points`` draws is below
    ``tol``.  RBMs small enough to enumerate are differentiated through the
    exact (enumerated) density.
    """
    model = as_model(model)
    if isinstance(model.spec, GbRbmSpec) and model.spec.n_hidden <= 20:
        logp = lambda X: exact_log_density(model, X)  # noqa: E731
    elif model.has_log_density:
        logp = model.log_density_unnormalized
    else:
        raise UnsupportedOperationError(f"{model.label} has no log density to differentiate")
    rng = as_rng(seed)
    if model.sampler is not None:
        X = sample_model(model, points, rng)
    else:
        X = rng.standard_normal((points, model.dim))
    fd = np.empty_like(X)
    for j in range(model.dim):
        e = np.zeros(model.dim)
        e[j] = step
        fd[:, j] = (logp(X + e) - logp(X - e)) / (2 * step)
    S = model.score(X)
    disc = np.linalg.norm(S - fd, axis=1) / np.maximum(1.0, np.linalg.norm(fd, axis=1))
    worst = float(disc.max())
    return {
        "model_label": model.label,
        "points": int(points),
        "seed": seed,
        "step": step,
        "max_relative_discrepancy": worst,
        "tolerance": tol,
        "passed": bool(worst < tol),
    }
