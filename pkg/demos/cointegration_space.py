"""How the likelihood separates the long-run parameter from the rest.

Fixing the cointegration parameter away from its true value adds a misfit
that grows with the sample size, while the short-run part stays bounded.

    python demos/cointegration_space.py
"""

import numpy as np

from cointqml import build_realization, get_model, likelihood_decomposition, simulate_exact_gaussian


def main():
    spec = get_model("canonical2d")
    series = simulate_exact_gaussian(build_realization(spec, spec.theta0), n=16000,
                                     rng=np.random.default_rng(3))
    print(f"{'n':>6} {'theta_13':>9} {'long-run misfit':>16} {'short-run part':>15}")
    for n in (1000, 4000, 16000):
        y = series.head(n)
        for t13 in (2.9, 2.99, 3.0):
            theta = spec.theta0.copy()
            theta[12] = t13
            L1, L2 = likelihood_decomposition(spec, theta, spec.theta0[[12]], y)
            print(f"{n:>6} {t13:>9.2f} {L1:>16.6f} {L2:>15.6f}")


if __name__ == "__main__":
    main()
