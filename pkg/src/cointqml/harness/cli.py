"""Command line entry point: ``cointqml <command> [options]``.

Exit codes: 0 success, 1 runtime error, 2 invalid configuration or usage,
3 every replicate of a study failed, 4 failed assumption check (``check --strict``).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from ..estimate import EstimationError, qml_estimate, short_run_covariance
from ..model import check_assumptions
from ..simulate import read_series, write_series
from .config import ConfigError, ExperimentConfig, load_config
from .montecarlo import (StudyError, misspecification_study, rate_study, replicate_seed,
                         run_replicates, simulate_replicate, stage_rng, start_points,
                         STAGE_STARTS)
from .report import misspec_table, rates_table, report, summary_table

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_TOTAL_FAILURE, EXIT_CHECK = 0, 1, 2, 3, 4


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {"seed": args.seed, "model": args.model, "output": args.out}
    for key in ("replicates", "n"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    if getattr(args, "driver", None):
        over["driver"] = {"type": args.driver}
    return cfg.with_overrides(**over)


def _out(cfg, default):
    return Path(cfg.output) if cfg.output else Path(default)


def cmd_simulate(args):
    cfg = _config(args)
    seed = replicate_seed(cfg.seed, 1)
    series = simulate_replicate(cfg, seed)
    out = _out(cfg, "series") / "series.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_series(series, out, {"model": cfg.model_name(), "seed": seed,
                               "driver": cfg.driver.get("type")})
    print(f"wrote {series.n} observations to {out}")


def cmd_estimate(args):
    cfg = _config(args)
    spec = cfg.spec()
    if args.series:
        series = read_series(args.series)
        seed = int(cfg.seed)
    else:
        seed = replicate_seed(cfg.seed, 1)
        series = simulate_replicate(cfg, seed)
    center = cfg.true_theta() if spec.theta0 is not None else None
    starts = start_points(spec, center, cfg.estimator.starts, cfg.estimator.start_half_width,
                          stage_rng(seed, STAGE_STARTS))
    res = qml_estimate(spec, series, init=starts, options=cfg.estimator.options())
    lines = [f"model {spec.name}, n={series.n}, status {res.status}, "
             f"iterations {res.iterations}, evaluations {res.evaluations}",
             f"minimized likelihood {res.loglik:.10f}"]
    se = None
    if spec.short_idx:
        try:
            se = short_run_covariance(spec, res.theta, series).se
        except EstimationError as exc:
            lines.append(f"standard errors unavailable: {exc}")
    short = list(spec.short_idx)
    for i, name in enumerate(spec.param_names):
        extra = ""
        if se is not None and i in short:
            extra = f"  (se {se[short.index(i)]:.4f})"
        kind = "long " if i in spec.long_idx else "short"
        lines.append(f"  {name:<10} {kind} {res.theta[i]: .6f}{extra}")
    print("\n".join(lines))
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.txt").write_text("\n".join(lines) + "\n")


def cmd_mc(args):
    cfg = _config(args)
    res = run_replicates(cfg, workers=args.workers, out=_out(cfg, "mc"))
    print(summary_table(res.summary, title=f"{cfg.model_name()} / {cfg.driver['type']}"))
    print(f"per-replicate results: {res.csv_path}")


def cmd_misspec(args):
    cfg = _config(args)
    res = misspecification_study(cfg, workers=args.workers, out=_out(cfg, "misspec"))
    print(misspec_table(res))


def cmd_rates(args):
    cfg = _config(args)
    sizes = [int(k) for k in args.sizes.split(",")] if args.sizes else None
    res = rate_study(cfg, sizes, workers=args.workers, out=_out(cfg, "rates"))
    print(rates_table(res))


def cmd_check(args):
    cfg = _config(args)
    spec = cfg.spec()
    rep = check_assumptions(spec, cfg.true_theta(), h=cfg.h)
    print(rep.summary())
    if args.strict and not rep.passed:
        return EXIT_CHECK
    return EXIT_OK


def cmd_report(args):
    print(report(args.paths, out_dir=args.out))


def build_parser():
    p = argparse.ArgumentParser(prog="cointqml", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=False):
        sp.add_argument("--config", help="YAML experiment configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--model", help="model name (overrides the config)")
        sp.add_argument("--driver", choices=("brownian", "nig"), help="driver (study default parameters)")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--n", type=int, help="observations per path")
        if workers:
            sp.add_argument("--workers", type=int, default=1, help="worker processes")

    common(sub.add_parser("simulate", help="simulate one observed path"))
    est = sub.add_parser("estimate", help="estimate on a series file or a fresh simulated path")
    common(est)
    est.add_argument("--series", help="CSV written by 'simulate'")
    common(sub.add_parser("mc", help="Monte Carlo bias / std table"), workers=True)
    common(sub.add_parser("misspec", help="minimized likelihood on misspecified spaces"), workers=True)
    rates = sub.add_parser("rates", help="std of estimates against n and log-log slopes")
    common(rates, workers=True)
    rates.add_argument("--sizes", help="comma-separated sample sizes, e.g. 500,2000,8000")
    chk = sub.add_parser("check", help="numerical assumption report at the true parameter")
    common(chk)
    chk.add_argument("--strict", action="store_true", help="exit 4 when a check fails")
    rep = sub.add_parser("report", help="render tables from result directories")
    rep.add_argument("paths", nargs="+")
    rep.add_argument("--out", help="directory for report.txt and QQ data")
    return p


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "mc": cmd_mc,
            "misspec": cmd_misspec, "rates": cmd_rates, "check": cmd_check, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyError as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_TOTAL_FAILURE
    except (EstimationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
