"""Plain-text tables and normal QQ data for Monte Carlo output."""

from pathlib import Path

import numpy as np
from scipy.stats import norm

from .montecarlo import MonteCarloSummary, StudyError, read_replicate_csv


def summary_table(summary, title=None):
    """One row per parameter with columns True / Mean / Bias / Std."""
    width = max(9, max(len(n) for n in summary.names))
    head = f"{'':<{width}}  {'True':>9}  {'Mean':>9}  {'Bias':>9}  {'Std':>9}"
    lines = [title] if title else []
    lines += [head, "-" * len(head)]
    for i, name in enumerate(summary.names):
        lines.append(f"{name:<{width}}  {summary.true[i]:>9.4f}  {summary.mean[i]:>9.4f}  "
                     f"{summary.bias[i]:>9.4f}  {summary.std[i]:>9.4f}")
    lines.append(f"replicates: {summary.replicates}, failures: {summary.failures}")
    return "\n".join(lines)


def misspec_table(result):
    stats = result.stats()
    head = f"{'':<6}" + "".join(f"{name:>12}" for name in result.spaces)
    lines = [head, "-" * len(head)]
    for key in ("mean", "std", "min", "max"):
        lines.append(f"{key:<6}" + "".join(f"{stats[s][key]:>12.4f}" for s in result.spaces))
    if result.long_minima is not None:
        lines.append(f"Theta_S minimum larger on the {result.factor}x longer path: "
                     f"{100 * result.divergence_share():.0f}% of replicates")
    return "\n".join(lines)


def rates_table(result):
    head = f"{'':<10}{'kind':>6}" + "".join(f"{'n=' + str(n):>11}" for n in result.sample_sizes) + f"{'slope':>9}"
    lines = [head, "-" * len(head)]
    for j, name in enumerate(result.names):
        kind = "long" if j in result.long_idx else "short"
        lines.append(f"{name:<10}{kind:>6}" + "".join(f"{v:>11.5f}" for v in result.std[:, j])
                     + f"{result.slopes[j]:>9.3f}")
    return "\n".join(lines)


def qq_data(values):
    """``(normal quantiles, standardized order statistics, correlation)`` for one coordinate."""
    x = np.sort(np.asarray(values, dtype=float))
    x = x[np.isfinite(x)]
    if x.size < 3:
        raise StudyError("need at least three values for a QQ plot")
    q = norm.ppf((np.arange(1, x.size + 1) - 0.5) / x.size)
    sd = x.std(ddof=1)
    z = (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)
    corr = float(np.corrcoef(q, x)[0, 1]) if sd > 0 else np.nan
    return q, z, corr


def write_qq_files(rows, coords, out_dir, names=None):
    """One ``qq_<name>.csv`` per coordinate; returns the QQ correlation per coordinate."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    est = np.array([r["theta"] for r in rows if not r["status"].startswith("failed")])
    if est.size == 0:
        raise StudyError("empty replicate set")
    corrs = {}
    for j in coords:
        name = names[j] if names else f"theta_{j + 1}"
        q, z, corr = qq_data(est[:, j])
        np.savetxt(out_dir / f"qq_{name}.csv", np.column_stack([q, z]), delimiter=",",
                   header="normal_quantile,standardized_estimate", comments="", fmt="%.10g")
        corrs[name] = corr
    return corrs


def report(paths, out_dir=None, short_idx=None):
    """Render the summary tables for result directories or CSV files.

    Each path is a directory holding ``summary.csv`` (and ``replicates.csv``)
    as written by :func:`~cointqml.harness.montecarlo.run_replicates`, or a
    summary CSV itself. Raises :class:`StudyError` for missing or empty input
    before anything is written.
    """
    items = []
    for p in map(Path, paths):
        summ = p / "summary.csv" if p.is_dir() else p
        reps = p / "replicates.csv" if p.is_dir() else p.with_name("replicates.csv")
        if not summ.exists():
            raise FileNotFoundError(f"missing summary file {summ}")
        rows = read_replicate_csv(reps) if reps.exists() else None
        if rows is not None and not [r for r in rows if not r["status"].startswith("failed")]:
            raise StudyError(f"{reps}: empty replicate set")
        items.append((p, MonteCarloSummary.read_csv(summ), rows))
    if not items:
        raise StudyError("no result paths given")
    texts = []
    for p, summary, rows in items:
        text = summary_table(summary, title=str(p))
        if rows is not None and out_dir is not None and len(rows) >= 3:
            idx = short_idx if short_idx is not None else range(len(summary.names))
            corrs = write_qq_files(rows, idx, Path(out_dir) / p.name, summary.names)
            text += "\nQQ correlation: " + ", ".join(f"{k} {v:.3f}" for k, v in corrs.items())
        texts.append(text)
    out = "\n\n".join(texts)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "report.txt").write_text(out + "\n")
    return out

