"""
Replicated simulation and estimation.

Every replicate draws its randomness from a seed derived only from the master
seed and the replicate index, so results do not depend on the number of
workers or on scheduling order.
"""

import csv
import multiprocessing as mp
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..catalog import MISSPEC_SPACES, get_model
from ..estimate import qml_estimate
from ..model import build_realization
from ..simulate import simulate_euler, simulate_exact_gaussian

STAGE_SIMULATE = 0
STAGE_STARTS = 1
# seed-derivation tag separating misspecification data from the plain Monte Carlo runs
MISSPEC_TAG = 1


class StudyError(RuntimeError):
    """Raised when every replicate of a study fails."""


def replicate_seed(master, replicate, tag=()):
    """64-bit seed of one replicate, derived from ``(master, *tag, replicate)``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(tag) + (int(replicate),))
    return int(ss.generate_state(1, np.uint64)[0])


def stage_rng(seed, stage):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stage),)))


def simulate_replicate(cfg, seed, n=None):
    """Data for one replicate, generated at the configuration's true parameter."""
    spec = cfg.spec()
    r = build_realization(spec, cfg.true_theta(), check_box=False)
    n = cfg.n if n is None else int(n)
    rng = stage_rng(seed, STAGE_SIMULATE)
    if cfg.scheme == "exact-gaussian":
        return simulate_exact_gaussian(r, h=cfg.h, n=n, rng=rng, cfg=cfg.levy())
    return simulate_euler(r, cfg.levy(), T=n * cfg.h, euler_dt=cfg.euler_dt, h=cfg.h, rng=rng,
                          burn_in=cfg.burn_in)


def start_points(spec, center, count, half_width, rng):
    """``center + U(-w, w)`` per coordinate, clipped to the box; uniform over the box without a center."""
    if center is None:
        return spec.lower + (spec.upper - spec.lower) * rng.random((count, spec.s))
    pts = np.asarray(center) + rng.uniform(-half_width, half_width, size=(count, spec.s))
    return np.clip(pts, spec.lower, spec.upper)


def _estimate(spec, series, center, est, rng):
    starts = start_points(spec, center, est.starts, est.start_half_width, rng)
    return qml_estimate(spec, series, init=starts, options=est.options())


# ---------------------------------------------------------------------------
# Monte Carlo tables


@dataclass
class MonteCarloSummary:
    names: tuple
    true: np.ndarray
    mean: np.ndarray
    bias: np.ndarray
    std: np.ndarray
    replicates: int
    failures: int

    @classmethod
    def from_estimates(cls, names, true, estimates, failures=0):
        est = np.atleast_2d(np.asarray(estimates, dtype=float))
        if est.shape[0] == 0 or est.size == 0:
            raise StudyError("no successful replicates to summarize")
        true = np.asarray(true, dtype=float)
        mean = est.mean(axis=0)
        std = est.std(axis=0, ddof=1) if est.shape[0] > 1 else np.full(true.size, np.nan)
        return cls(tuple(names), true, mean, true - mean, std, est.shape[0], int(failures))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "true", "mean", "bias", "std", "replicates", "failures"])
            for i, name in enumerate(self.names):
                w.writerow([name] + [repr(float(x)) for x in
                                     (self.true[i], self.mean[i], self.bias[i], self.std[i])]
                           + [self.replicates, self.failures])
        return Path(path)

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise StudyError(f"{path}: empty summary")
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(tuple(r["parameter"] for r in rows), col("true"), col("mean"), col("bias"),
                   col("std"), int(rows[0]["replicates"]), int(rows[0]["failures"]))


@dataclass
class MonteCarloResult:
    summary: MonteCarloSummary
    rows: list
    estimates: np.ndarray
    csv_path: Optional[Path] = None
    summary_path: Optional[Path] = None


def _replicate_task(args):
    cfg, index, seed = args
    spec = cfg.spec()
    row = {"replicate": index, "seed": seed, "status": "failed", "iters": 0,
           "loglik": float("nan"), "theta": np.full(spec.s, np.nan)}
    try:
        series = simulate_replicate(cfg, seed)
        res = _estimate(spec, series, cfg.true_theta(), cfg.estimator, stage_rng(seed, STAGE_STARTS))
        row.update(status=res.status, iters=res.iterations, loglik=res.loglik, theta=res.theta)
    except Exception as exc:  # one bad replicate must not abort the study
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
    return row


def map_tasks(func, tasks, workers=1):
    """Ordered map, in-process for ``workers <= 1`` and over a process pool otherwise."""
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(min(int(workers), len(tasks))) as pool:
        return pool.map(func, tasks, chunksize=1)


def write_replicate_csv(rows, path, s):
    header = ["replicate", "seed", "status", "iters", "loglik"] + [f"theta_{i + 1}" for i in range(s)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r["replicate"], r["seed"], r["status"], r["iters"], repr(float(r["loglik"]))]
                       + [repr(float(x)) for x in r["theta"]])
    return Path(path)


def read_replicate_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            names = [k for k in rec if k.startswith("theta_")]
            rows.append({"replicate": int(rec["replicate"]), "seed": int(rec["seed"]),
                         "status": rec["status"], "iters": int(rec["iters"]),
                         "loglik": float(rec["loglik"]),
                         "theta": np.array([float(rec[k]) for k in names])})
    return rows


def _ok(row):
    return not row["status"].startswith("failed")


def run_replicates(cfg, workers=1, out=None, tag=()):
    """Simulate and estimate ``cfg.replicates`` times; summarize the successful replicates.

    Writes ``replicates.csv`` and ``summary.csv`` into ``out`` when given.
    """
    spec = cfg.spec()
    tasks = [(cfg, i + 1, replicate_seed(cfg.seed, i + 1, tag)) for i in range(cfg.replicates)]
    rows = map_tasks(_replicate_task, tasks, workers)
    good = [r for r in rows if _ok(r)]
    if not good:
        raise StudyError(f"all {len(rows)} replicates failed; first error: {rows[0]['status']}")
    est = np.array([r["theta"] for r in good])
    summary = MonteCarloSummary.from_estimates(spec.param_names, cfg.true_theta(), est,
                                               len(rows) - len(good))
    result = MonteCarloResult(summary, rows, est)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = write_replicate_csv(rows, out / "replicates.csv", spec.s)
        result.summary_path = summary.write_csv(out / "summary.csv")
        (out / "config.yaml").write_text(cfg.dumps())
    return result


# ---------------------------------------------------------------------------
# misspecified parameter spaces


@dataclass
class MisspecificationResult:
    spaces: tuple
    minima: np.ndarray            # (R, k) minimized likelihood per replicate and space
    rows: list
    long_minima: Optional[np.ndarray] = None   # Theta_S minima on the longer matched path
    factor: int = 1

    def stats(self):
        out = {}
        for j, name in enumerate(self.spaces):
            v = self.minima[:, j]
            v = v[np.isfinite(v)]
            out[name] = {"mean": float(v.mean()) if v.size else np.nan,
                         "std": float(v.std(ddof=1)) if v.size > 1 else np.nan,
                         "min": float(v.min()) if v.size else np.nan,
                         "max": float(v.max()) if v.size else np.nan,
                         "count": int(v.size)}
        return out

    def divergence_share(self):
        """Share of replicates whose Theta_S minimum grows on the ``factor``-times longer path."""
        if self.long_minima is None or "Theta_S" not in self.spaces:
            return np.nan
        short = self.minima[:, self.spaces.index("Theta_S")]
        ok = np.isfinite(short) & np.isfinite(self.long_minima)
        return float(np.mean(self.long_minima[ok] > short[ok])) if ok.any() else np.nan


def _misspec_task(args):
    cfg, index, seed, spaces, factor = args
    row = {"replicate": index, "seed": seed}
    try:
        series = simulate_replicate(cfg, seed, n=cfg.n * factor)
    except Exception as exc:
        row["status"] = f"failed: {exc}"
        return row
    short = series.head(cfg.n)
    truth = cfg.true_theta()
    for k, name in enumerate(spaces):
        spec = get_model(MISSPEC_SPACES[name])
        center = _restricted_center(name, spec, truth)
        rng = stage_rng(seed, STAGE_STARTS + k)
        try:
            row[name] = _estimate(spec, short, center, cfg.estimator, rng).loglik
        except Exception as exc:
            row[name] = float("inf")
            row[f"{name}_error"] = str(exc)
        if name == "Theta_S" and factor > 1:
            try:
                row["Theta_S_long"] = _estimate(spec, series, center, cfg.estimator,
                                                stage_rng(seed, STAGE_STARTS + 100)).loglik
            except Exception:
                row["Theta_S_long"] = float("inf")
    row["status"] = "ok"
    return row


def _restricted_center(name, spec, truth):
    # the restricted spaces drop coordinates of the full 13-parameter vector
    if name == "Theta":
        return truth
    if name == "Theta_W":
        return truth[:12]
    if name == "Theta_S":
        return np.r_[truth[:7], truth[9:12]]
    if name == "Theta_I":
        return truth[9:12]
    return spec.theta0


def misspecification_study(cfg, workers=1, out=None):
    """Minimized likelihood of each replicate over the true and the misspecified spaces."""
    if cfg.spec().name != "canonical2d" or cfg.driver.get("type") != "brownian":
        raise ValueError("the misspecification study is defined for the 2-d Brownian model")
    spaces = tuple(cfg.spaces)
    factor = max(1, int(cfg.divergence_factor))
    tasks = [(cfg, i + 1, replicate_seed(cfg.seed, i + 1, (MISSPEC_TAG,)),
              spaces, factor) for i in range(cfg.replicates)]
    rows = map_tasks(_misspec_task, tasks, workers)
    good = [r for r in rows if r["status"] == "ok"]
    if not good:
        raise StudyError("all replicates failed")
    minima = np.array([[r[s] for s in spaces] for r in good])
    long_min = np.array([r.get("Theta_S_long", np.nan) for r in good]) if factor > 1 else None
    result = MisspecificationResult(spaces, minima, rows, long_min, factor)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        cols = ["replicate", "seed", "status"] + list(spaces) + (["Theta_S_long"] if factor > 1 else [])
        with open(out / "misspec.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([r.get(c, "") if c in ("replicate", "seed", "status") else repr(float(r.get(c, np.nan)))
                            for c in cols])
        (out / "config.yaml").write_text(cfg.dumps())
    return result


# ---------------------------------------------------------------------------
# convergence rates


@dataclass
class RateResult:
    sample_sizes: tuple
    names: tuple
    std: np.ndarray          # (len(sample_sizes), s)
    slopes: np.ndarray       # (s,)
    long_idx: tuple
    failures: tuple

    @property
    def short_idx(self):
        return tuple(i for i in range(len(self.names)) if i not in self.long_idx)


def loglog_slopes(sample_sizes, std):
    x = np.log(np.asarray(sample_sizes, dtype=float))
    Ylog = np.log(np.asarray(std, dtype=float))
    return np.array([np.polyfit(x, Ylog[:, j], 1)[0] for j in range(Ylog.shape[1])])


def rate_study(cfg, sample_sizes=None, workers=1, out=None):
    """Standard deviation of the estimates at several sample sizes and the log-log slope per coordinate."""
    sizes = tuple(int(k) for k in (sample_sizes or cfg.sample_sizes or ()))
    if len(sizes) < 3 or max(sizes) < 8 * min(sizes):
        raise ValueError("need at least three sample sizes spanning a factor of 8")
    spec = cfg.spec()
    stds, fails = [], []
    for n in sizes:
        sub_out = None if out is None else Path(out) / f"n{n}"
        res = run_replicates(cfg.with_overrides(n=n), workers, sub_out, tag=(n,))
        stds.append(res.summary.std)
        fails.append(res.summary.failures)
    std = np.array(stds)
    result = RateResult(sizes, tuple(spec.param_names), std, loglog_slopes(sizes, std),
                        spec.long_idx, tuple(fails))
    if out is not None:
        with open(Path(out) / "rates.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "kind"] + [f"std_n{n}" for n in sizes] + ["slope"])
            for j, name in enumerate(result.names):
                kind = "long" if j in spec.long_idx else "short"
                w.writerow([name, kind] + [repr(float(v)) for v in std[:, j]] + [repr(float(result.slopes[j]))])
    return result
