"""Simulate one path of the 2-d cointegrated model, estimate it and print standard errors.

    python demos/estimate_one_path.py [seed]
"""

import sys

import numpy as np

from cointqml import (build_realization, default_driver, get_model, qml_estimate,
                      quasi_log_likelihood, short_run_covariance, simulate_euler)


def main(seed=1):
    spec = get_model("canonical2d")
    truth = build_realization(spec, spec.theta0)
    series = simulate_euler(truth, default_driver("canonical2d", "brownian"), T=2000.0,
                            euler_dt=0.01, h=1.0, rng=np.random.default_rng(seed))
    print(f"simulated {series.n} observations, L(theta0) = "
          f"{quasi_log_likelihood(spec, spec.theta0, series).value:.6f}")

    fit = qml_estimate(spec, series, init=spec.theta0)
    print(f"status {fit.status} after {fit.evaluations} evaluations, L(theta_hat) = {fit.loglik:.6f}")
    cov = short_run_covariance(spec, fit.theta, series)
    short = list(spec.short_idx)
    for i, name in enumerate(spec.param_names):
        se = f"{cov.se[short.index(i)]:.4f}" if i in short else "  (long run)"
        print(f"  {name:<9} true {spec.theta0[i]: .4f}  estimate {fit.theta[i]: .4f}  se {se}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
