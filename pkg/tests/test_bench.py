import csv
import json

import numpy as np
import pytest

from ksdgof.bench import (
    ExperimentConfig,
    _seed,
    draw_true_spec,
    iter_trials,
    parse_method,
    run_benchmark,
    run_trial,
    score_check,
    summarize,
)
from ksdgof.errors import ParseError, UnsupportedOperationError
from ksdgof.models import GaussianSpec, as_model, custom_model, random_gbrbm


def _small(**kw):
    base = dict(family="gmm", sigmas=[1.0], n_sweep=[30], methods=["ksd-bootstrap", "ksd-linear", "ks", "lr-oracle"],
                trials=6, bootstrap_m=100, master_seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_parse_method():
    assert parse_method("ksd-bootstrap") == ("ksd-bootstrap", None)
    assert parse_method("mmd-mc(100)") == ("mmd-mc", 100)
    assert parse_method("mmd-mcmc(1000)") == ("mmd-mcmc", 1000)
    with pytest.raises(ParseError):
        parse_method("mmd-mc")


@pytest.mark.parametrize("kw,field", [
    (dict(family="ising"), "family"),
    (dict(sigmas=[-1.0]), "sigmas"),
    (dict(trials=0), "trials"),
    (dict(alpha=1.5), "alpha"),
    (dict(bootstrap_m=10), "bootstrap_m"),
    (dict(methods=["mmd-mcmc(100)"]), "methods"),
    (dict(target="rbm-B"), "target"),
    (dict(design="both"), "design"),
])
def test_config_validation(kw, field):
    with pytest.raises(ParseError, match=field):
        _small(**kw)


def test_config_from_dict_rejects_unknown():
    with pytest.raises(ParseError, match="speed"):
        ExperimentConfig.from_dict({"family": "gmm", "sigmas": [1], "speed": 3})
    with pytest.raises(ParseError, match="sigmas"):
        ExperimentConfig.from_dict({"family": "gmm"})


def test_benchmark_outputs(tmp_path):
    cfg = _small()
    rows = run_benchmark(cfg, tmp_path)
    with open(tmp_path / "error_rates.csv") as fh:
        table = list(csv.DictReader(fh))
    assert [r["method"] for r in table] == cfg.methods
    for r in table:
        assert {"family", "method", "sigma_per", "n", "trials", "error_rate", "type1_rate", "type2_rate"} <= set(r)
    trials = [json.loads(line) for line in (tmp_path / "trials.ndjson").read_text().splitlines()]
    assert len(trials) == 6
    for t in trials:
        assert t["hypothesis"] in ("H0", "H1")
        assert (t["q_spec"] is None) == (t["hypothesis"] == "H0")
        for res in t["results"].values():
            assert res["correct"] == ((res["decision"] == "reject") == (t["hypothesis"] == "H1"))
    meta = json.loads((tmp_path / "experiment.json").read_text())
    assert meta["config"]["model_mode"] == "fixed"
    assert len(meta["true_model"]["means"]) == 5
    assert len(rows) == len(cfg.methods)


def test_benchmark_replays_bit_for_bit(tmp_path):
    cfg = _small(methods=["ksd-bootstrap", "mmd-mc(50)", "ks"])
    run_benchmark(cfg, tmp_path / "a")
    run_benchmark(cfg, tmp_path / "b")
    for name in ("error_rates.csv", "trials.ndjson", "experiment.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trial_replay_from_log():
    cfg = _small(trials=3)
    records = list(iter_trials(cfg))
    p = draw_true_spec(cfg, np.random.default_rng(_seed(cfg.master_seed, 0)))
    again = run_trial(cfg, p, records[1]["sigma_per"], records[1]["n"], records[1]["seed"])
    assert again["results"] == records[1]["results"]


def test_per_trial_model_mode_records_spec():
    recs = list(iter_trials(_small(model_mode="per-trial", trials=2)))
    assert all("p_spec" in r for r in recs)
    assert recs[0]["p_spec"] != recs[1]["p_spec"]


def test_failed_methods_are_counted():
    cfg = _small(trials=2, n_sweep=[4], methods=["ksd-linear", "ksd-bootstrap"])
    recs = list(iter_trials(cfg))
    # force a failure record
    recs[0]["results"]["ksd-linear"] = {"status": "error", "error": "boom"}
    row = [r for r in summarize(cfg, recs) if r["method"] == "ksd-linear"][0]
    assert row["failed"] == 1 and row["trials"] == 1


def test_null_design_has_no_type2():
    rows = summarize(_small(design="null"), list(iter_trials(_small(design="null"))))
    assert all(r["type2_rate"] is None and r["type1_rate"] == r["error_rate"] for r in rows)


def test_rbm_benchmark_runs_every_method():
    cfg = ExperimentConfig(family="gbrbm", sigmas=[1.0], n_sweep=[20], trials=2, bootstrap_m=100, rbm_dim=6,
                           rbm_hidden=3, mcmc_burn_in=10,
                           methods=["ksd-bootstrap", "ksd-linear", "mmd-mc(20)", "mmd-mcmc(20)", "lr-oracle"])
    for rec in iter_trials(cfg):
        assert all(r["status"] == "ok" for r in rec["results"].values())


def test_bootstrap_error_rate_falls_with_perturbation():
    cfg = _small(sigmas=[0.5, 2.0], n_sweep=[100], methods=["ksd-bootstrap"], trials=200, bootstrap_m=1000,
                 master_seed=0)
    rows = {r["sigma_per"]: r for r in summarize(cfg, list(iter_trials(cfg)))}
    assert rows[2.0]["error_rate"] <= rows[0.5]["error_rate"]


def test_bootstrap_type1_in_band():
    # 500 null trials per sweep point (the property asks for at least 200)
    cfg = _small(sigmas=[0.5, 1.0, 2.0], n_sweep=[100], methods=["ksd-bootstrap"], trials=500,
                 bootstrap_m=1000, master_seed=0, design="null")
    for r in summarize(cfg, list(iter_trials(cfg))):
        assert 0.02 <= r["type1_rate"] <= 0.09


# --------------------------------------------------------------------------
# score check


def test_score_check_gaussian():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    res = score_check(as_model(GaussianSpec(rng.standard_normal(3), A @ A.T + np.eye(3))), 100, 0)
    assert res["passed"] and res["max_relative_discrepancy"] < 1e-8


def test_score_check_rbm():
    res = score_check(as_model(random_gbrbm(10, 5, np.random.default_rng(1))), 100, 0)
    assert res["passed"] and res["max_relative_discrepancy"] < 1e-5


def test_score_check_sign_flip_fails():
    good = as_model(GaussianSpec([0.5], [[2.0]]))
    bad = custom_model(lambda X: -good.score(X), 1, log_density=good.log_density_unnormalized,
                       sampler=good.sampler)
    assert not score_check(bad, 50, 0)["passed"]


def test_score_check_needs_density():
    with pytest.raises(UnsupportedOperationError):
        score_check(custom_model(lambda X: -X, 2), 10, 0)


def test_rbm_mmd_mc_worse_than_ksd_at_small_perturbation():
    # at sigma 1 every method saturates; the ordering shows where the problem is hard
    cfg = ExperimentConfig(family="gbrbm", sigmas=[0.02], n_sweep=[100], trials=200, master_seed=0,
                           methods=["ksd-bootstrap", "mmd-mc(100)", "lr-oracle"])
    rows = {r["method"]: r["error_rate"] for r in summarize(cfg, list(iter_trials(cfg)))}
    assert rows["mmd-mc(100)"] > rows["ksd-bootstrap"] > rows["lr-oracle"]
