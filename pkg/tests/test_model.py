import numpy as np
import pytest

from cointqml import get_model, spec_from_dict
from cointqml.kalman import quasi_log_likelihood
from cointqml.model import (AssumptionViolation, StateSpaceRealization, build_realization,
                            check_assumptions, discretize, kalman_bertram_gap, vech, vech_to_sym)


def test_vech_is_column_major():
    S = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    np.testing.assert_array_equal(vech(S), [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(vech_to_sym(vech(S), 3), S)


def test_realization_blocks(real2d):
    assert (real2d.d, real2d.c, real2d.N, real2d.m) == (2, 1, 4, 2)
    np.testing.assert_array_equal(real2d.A[:1], 0.0)
    np.testing.assert_allclose(real2d.C1.T @ real2d.C1, 1.0)
    np.testing.assert_allclose(real2d.C1_perp.T @ real2d.C1, 0.0, atol=1e-15)


def test_pi_annihilates_cointegration_space(real2d):
    f = discretize(real2d, 1.0)
    assert np.linalg.norm(f.Pi @ real2d.C1) < 1e-10
    assert np.linalg.matrix_rank(f.Pi, tol=1e-8) == real2d.d - real2d.c
    assert f.rho < 1


def test_k_coefficients_decay(real2d):
    f = discretize(real2d, 1.0)
    k = f.k_coefficients(tol=1e-12)
    assert np.linalg.norm(k[-1], 2) <= 1e-12
    # k_j = C F^j (I - F)^{-1} K
    G = np.linalg.solve(np.eye(4) - f.F, f.K)
    np.testing.assert_allclose(k[1], f.C @ f.F @ f.F @ G, atol=1e-14)


@pytest.mark.parametrize("index,value,tag", [(0, 2.0, "A4"), (9, -0.3, "A3")])
def test_assumption_violations(spec2d, index, value, tag):
    theta = spec2d.theta0.copy()
    theta[index] = value
    with pytest.raises(AssumptionViolation) as err:
        build_realization(spec2d, theta, check_box=False)
    assert err.value.assumption == tag


def test_rank_deficient_b1(spec2d):
    theta = spec2d.theta0.copy()
    theta[7:9] = 0.0
    with pytest.raises(AssumptionViolation) as err:
        build_realization(spec2d, theta, check_box=False)
    assert err.value.assumption == "A6"


def test_kalman_bertram_failure():
    # eigenvalues +-i pi: their difference 2 pi i lies on the lattice for h = 1
    r = StateSpaceRealization(np.array([[-1e-3, np.pi], [-np.pi, -1e-3]]), np.zeros((0, 2)),
                              np.eye(2), np.zeros((2, 0)), np.eye(2), np.eye(2))
    assert kalman_bertram_gap(r.A2, 1.0) < 1e-2
    assert kalman_bertram_gap(r.A2, 0.5) > 1.0


def test_kalman_bertram_exact_violation():
    r = StateSpaceRealization(np.array([[-1.0, np.pi], [-np.pi, -1.0]]), np.zeros((0, 2)),
                              np.eye(2), np.zeros((2, 0)), np.eye(2), np.eye(2))
    with pytest.raises(AssumptionViolation) as err:
        discretize(r, 1.0)
    assert err.value.assumption == "A10"


@pytest.mark.parametrize("name,s2", [("canonical2d", 12), ("canonical3d", 26)])
def test_assumption_report(name, s2):
    spec = get_model(name)
    rep = check_assumptions(spec, spec.theta0)
    assert rep.passed
    f = rep.checks["F"].measured
    assert f["j0"] >= 1 and f["ranks"][f["j0"]] == s2
    assert "A10" in rep.summary()


def test_box_and_dimension_errors(spec2d):
    with pytest.raises(ValueError):
        build_realization(spec2d, np.zeros(3))
    with pytest.raises(ValueError):
        build_realization(spec2d, spec2d.upper + 1.0)


def test_template_spec_matches_builtin(spec2d, path2d):
    t13 = "(t13**2 - 1) / (t13**2 + 1)"
    d = {
        "name": "user2d", "d": 2, "c": 1, "N": 4, "m": 2,
        "lower": spec2d.lower.tolist(), "upper": spec2d.upper.tolist(), "long_idx": [13],
        "theta0": spec2d.theta0.tolist(),
        "matrices": {
            "A2": [["t1", "t2", 0], [0, 0, 1], ["t3", "t4", "t5"]],
            "B1": [["t8", "t9"]],
            "B2": [["t1", "t2"], ["t6", "t7"], ["t3 + t5 * t6", "t4 + t5 * t7"]],
            "C1": [[t13], ["2 * t13 / (t13**2 + 1)"]],
            "C2": [[1, 0, 0], [0, 1, 0]],
            "Sigma_L": [["t10", "t11"], ["t11", "t12"]],
        },
    }
    user = spec_from_dict(d)
    a = quasi_log_likelihood(user, spec2d.theta0, path2d).value
    b = quasi_log_likelihood(spec2d, spec2d.theta0, path2d).value
    assert a == b


def test_template_rejects_code():
    d = {"name": "bad", "d": 1, "c": 0, "N": 1, "m": 1, "lower": [0.1], "upper": [1.0],
         "matrices": {"A2": [["__import__('os')"]], "B2": [[1]], "C2": [[1]], "Sigma_L": [[1]]}}
    with pytest.raises((ValueError, SyntaxError)):
        spec_from_dict(d).build([0.5])
