import numpy as np
import pytest

from cointqml.harness import cli, montecarlo
from cointqml.harness.config import (ConfigError, EstimatorConfig, ExperimentConfig,
                                     config_from_dict, load_config, loads_config)
from cointqml.harness.montecarlo import (MonteCarloSummary, StudyError, loglog_slopes,
                                         rate_study, read_replicate_csv, replicate_seed,
                                         run_replicates, write_replicate_csv)
from cointqml.harness.report import qq_data, report


def car1_cfg(**kw):
    base = dict(model="car1", replicates=4, n=300, scheme="exact-gaussian", seed=7,
                estimator=EstimatorConfig(starts=1))
    base.update(kw)
    return ExperimentConfig(**base)


# -- configuration ----------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(driver={"type": "nig"}, replicates=3, seed=11,
                           estimator=EstimatorConfig(starts=2))
    p = tmp_path / "c.yaml"
    p.write_text(cfg.dumps())
    assert load_config(p) == cfg


def test_config_true_theta_uses_driver_covariance():
    cfg = ExperimentConfig(driver={"type": "nig"})
    spec = cfg.spec()
    t = cfg.true_theta()
    assert np.allclose(t[:9], spec.theta0[:9]) and t[12] == spec.theta0[12]
    assert not np.allclose(t[9:12], spec.theta0[9:12])


@pytest.mark.parametrize("text", [
    "replicates: 0", "model: nope", "bogus: 1", "estimator: {method: bfgs}",
    "estimator: {colour: red}", "scheme: exact-gaussian\ndriver: nig", "n: 2.5",
    "model: car1\ndriver: nig", "seed: -1", "[1, 2]",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        loads_config(text)


def test_config_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_inline_model_config():
    model = {"name": "ou", "d": 1, "c": 0, "N": 1, "m": 1, "lower": [0.1, 0.1], "upper": [3, 3],
             "theta0": [1.0, 1.0],
             "matrices": {"A2": [["-t1"]], "B2": [[1]], "C2": [[1]], "Sigma_L": [["t2"]]}}
    cfg = config_from_dict({"model": model, "replicates": 2})
    assert cfg.model_name() == "ou" and cfg.levy().dim == 1


# -- seeds and summaries ----------------------------------------------------

def test_replicate_seeds():
    a = [replicate_seed(5, i) for i in range(1, 50)]
    assert len(set(a)) == len(a)
    assert replicate_seed(5, 3) == replicate_seed(5, 3)
    assert replicate_seed(5, 3) != replicate_seed(6, 3)
    assert replicate_seed(5, 3, (1,)) != replicate_seed(5, 3)


def test_summary_statistics():
    est = np.array([[1.0, 2.0], [3.0, 2.0], [2.0, 5.0]])
    s = MonteCarloSummary.from_estimates(("a", "b"), [2.5, 3.0], est)
    np.testing.assert_allclose(s.mean, [2.0, 3.0])
    np.testing.assert_allclose(s.bias, [0.5, 0.0])
    np.testing.assert_allclose(s.std, [1.0, np.sqrt(3.0)])
    assert np.isnan(MonteCarloSummary.from_estimates(("a",), [0.0], [[1.0]]).std[0])
    with pytest.raises(StudyError):
        MonteCarloSummary.from_estimates(("a",), [0.0], np.empty((0, 1)))


def test_summary_csv_round_trip(tmp_path):
    s = MonteCarloSummary.from_estimates(("a", "b"), [0.1, 0.2], np.random.default_rng(0).random((5, 2)))
    back = MonteCarloSummary.read_csv(s.write_csv(tmp_path / "s.csv"))
    np.testing.assert_array_equal(back.std, s.std)
    assert back.names == s.names and back.replicates == 5


def test_replicate_csv_round_trip(tmp_path):
    rows = [{"replicate": 1, "seed": 2**63 + 5, "status": "converged", "iters": 10,
             "loglik": 1 / 3, "theta": np.array([0.1, np.pi])},
            {"replicate": 2, "seed": 9, "status": "failed: ValueError: x, y", "iters": 0,
             "loglik": np.nan, "theta": np.array([np.nan, np.nan])}]
    back = read_replicate_csv(write_replicate_csv(rows, tmp_path / "r.csv", 2))
    assert back[0]["seed"] == 2**63 + 5 and back[0]["loglik"] == 1 / 3
    np.testing.assert_array_equal(back[0]["theta"], rows[0]["theta"])
    assert back[1]["status"] == rows[1]["status"]


# -- studies ----------------------------------------------------------------

def test_run_replicates_and_report(tmp_path):
    cfg = car1_cfg()
    res = run_replicates(cfg, out=tmp_path / "mc")
    assert res.summary.replicates == 4 and res.summary.failures == 0
    assert (tmp_path / "mc" / "config.yaml").exists()
    text = report([tmp_path / "mc"], out_dir=tmp_path / "rep")
    assert "Bias" in text and (tmp_path / "rep" / "report.txt").exists()
    assert len(text.splitlines()) == 1 + 2 + 2 + 1 + 1


def test_workers_do_not_change_results(tmp_path):
    cfg = car1_cfg(replicates=3)
    run_replicates(cfg, workers=1, out=tmp_path / "a")
    run_replicates(cfg, workers=2, out=tmp_path / "b")
    for name in ("replicates.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def _failing_on(seed_to_fail):
    real = montecarlo.qml_estimate

    def fake(spec, series, **kw):
        if series.provenance.get("seed_marker") == seed_to_fail or seed_to_fail == "all":
            raise RuntimeError("injected")
        return real(spec, series, **kw)
    return fake


def test_failure_isolation(monkeypatch):
    cfg = car1_cfg()
    bad = replicate_seed(cfg.seed, 2)
    real_sim = montecarlo.simulate_replicate

    def sim(cfg_, seed, n=None):
        s = real_sim(cfg_, seed, n)
        s.provenance["seed_marker"] = seed
        return s
    monkeypatch.setattr(montecarlo, "simulate_replicate", sim)
    monkeypatch.setattr(montecarlo, "qml_estimate", _failing_on(bad))
    res = run_replicates(cfg)
    assert res.summary.failures == 1 and res.summary.replicates == 3
    assert res.rows[1]["status"].startswith("failed: RuntimeError")


def test_total_failure(monkeypatch, tmp_path):
    monkeypatch.setattr(montecarlo, "qml_estimate", _failing_on("all"))
    with pytest.raises(StudyError):
        run_replicates(car1_cfg(), out=tmp_path / "x")
    assert cli.main(["mc", "--model", "car1", "--replicates", "2", "--n", "100",
                     "--out", str(tmp_path / "y")]) == cli.EXIT_TOTAL_FAILURE


def test_rate_study_sizes():
    with pytest.raises(ValueError):
        rate_study(car1_cfg(), [100, 200, 400])
    with pytest.raises(ValueError):
        rate_study(car1_cfg(), [100, 1000])


def test_loglog_slopes():
    n = np.array([100, 400, 1600])
    std = np.column_stack([n ** -0.5, 2 * n ** -1.0])
    np.testing.assert_allclose(loglog_slopes(n, std), [-0.5, -1.0])


@pytest.mark.slow
def test_car1_root_n_rate():
    res = rate_study(car1_cfg(replicates=40), [250, 1000, 4000])
    assert np.all(np.abs(res.slopes + 0.5) < 0.15)


def test_qq_data():
    q, z, corr = qq_data(np.random.default_rng(1).normal(size=200))
    assert corr > 0.98 and q.shape == z.shape == (200,)
    with pytest.raises(StudyError):
        qq_data([1.0, 2.0])


def test_report_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        report([tmp_path / "missing"])
    d = tmp_path / "empty"
    d.mkdir()
    MonteCarloSummary.from_estimates(("a",), [0.0], [[1.0], [2.0]]).write_csv(d / "summary.csv")
    write_replicate_csv([{"replicate": 1, "seed": 1, "status": "failed: x", "iters": 0,
                          "loglik": np.nan, "theta": np.array([np.nan])}], d / "replicates.csv", 1)
    with pytest.raises(StudyError):
        report([d])


# -- command line -----------------------------------------------------------

def test_cli_check(capsys):
    assert cli.main(["check"]) == cli.EXIT_OK
    assert "A10" in capsys.readouterr().out
    assert cli.main(["check", "--strict", "--model", "canonical3d"]) == cli.EXIT_OK


def test_cli_config_error(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("replicates: -3\n")
    assert cli.main(["check", "--config", str(p)]) == cli.EXIT_CONFIG


def test_cli_report_missing(tmp_path):
    assert cli.main(["report", str(tmp_path / "nothing")]) == cli.EXIT_ERROR


def test_cli_simulate_estimate(tmp_path, capsys):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--model", "car1", "--n", "400", "--out", str(out)]) == 0
    assert cli.main(["estimate", "--model", "car1", "--series", str(out / "series.csv"),
                     "--out", str(tmp_path / "est")]) == 0
    text = (tmp_path / "est" / "estimate.txt").read_text()
    assert "(se " in text and "sigma2" in text


def test_cli_mc(tmp_path, capsys):
    assert cli.main(["mc", "--model", "car1", "--replicates", "2", "--n", "200",
                     "--out", str(tmp_path / "mc")]) == 0
    assert "replicates: 2" in capsys.readouterr().out
