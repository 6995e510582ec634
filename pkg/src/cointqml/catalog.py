"""
Shipped model families.

``canonical2d`` and ``canonical3d`` are the bivariate (13 parameters, one
long-run coordinate) and trivariate (28 parameters, two long-run coordinates)
canonical parametrizations used in the simulation study. The three
``canonical2d_*`` variants are the restricted spaces of the misspecification
study, and ``car1`` is a stationary scalar CAR(1) used as a classical baseline.

User-defined families are built by :func:`spec_from_dict` from matrix templates
whose entries are numbers or arithmetic expressions in ``t1, t2, ...``.
"""

import ast
import math
from functools import partial

import numpy as np

from .levy import NIG
from .model import ModelSpec, vech_to_sym

SQRT3 = math.sqrt(3.0)

DELTA_2D = np.array([[1.25, -0.5], [-0.5, 1.0]])
DELTA_3D = np.array([[1.25, -0.5, SQRT3 / 6],
                     [-0.5, 1.0, -SQRT3 / 3],
                     [SQRT3 / 6, -SQRT3 / 3, 4.0 / 3.0]])

THETA0_2D = np.array([-1, -2, 1, -2, -3, 1, 2, 1, 1, 0.4751, -0.1622, 0.3708, 3.0])
THETA0_3D = np.array([-2, -3, -3, 1, 1, -1, 2, -1, -3, -3, -1, -1, 2, 1,
                      1, 0, 1, 1, -2, 0,
                      0.5310, -0.1934, 0.1678, 0.3784, -0.2227, 0.5632,
                      1.0, 2.0])


def nig_driver_2d():
    return NIG.centered(3.0, [1.0, 1.0], 1.0, DELTA_2D)


def nig_driver_3d():
    return NIG.centered(3.0, [1.0, 1.0, 1.0], 1.0, DELTA_3D)


def c1_2d(t13):
    den = t13**2 + 1
    return np.array([[(t13**2 - 1) / den], [2 * t13 / den]])


def c1_3d(t27, t28):
    s = t27**2 + t28**2
    r = math.sqrt(s)
    return np.array([[(s - 1) / (s + 1), 0.0],
                     [2 * t27 / (s + 1), t28 / r],
                     [2 * t28 / (s + 1), -t27 / r]])


def _stationary_2d(t):
    # t = (theta_1..theta_7, vech Sigma_L)
    A2 = np.array([[t[0], t[1], 0.0],
                   [0.0, 0.0, 1.0],
                   [t[2], t[3], t[4]]])
    B2 = np.array([[t[0], t[1]],
                   [t[5], t[6]],
                   [t[2] + t[4] * t[5], t[3] + t[4] * t[6]]])
    C2 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return A2, B2, C2, vech_to_sym(t[7:10], 2)


def _build_2d(theta):
    A2, B2, C2, S = _stationary_2d(np.r_[theta[:7], theta[9:12]])
    B1 = np.array([[theta[7], theta[8]]])
    return A2, B1, B2, c1_2d(theta[12]), C2, S


def _build_2d_fixed_c1(theta, c1):
    A2, B2, C2, S = _stationary_2d(np.r_[theta[:7], theta[9:12]])
    B1 = np.array([[theta[7], theta[8]]])
    return A2, B1, B2, np.asarray(c1, dtype=float).reshape(2, 1), C2, S


def _build_2d_stationary(theta):
    A2, B2, C2, S = _stationary_2d(theta)
    return A2, np.zeros((0, 2)), B2, np.zeros((2, 0)), C2, S


def _build_2d_integrated(theta):
    # B2 = 0 leaves only the trend block: Y = L, a bivariate random walk
    return (np.zeros((0, 0)), np.eye(2), np.zeros((0, 2)), np.eye(2), np.zeros((2, 0)),
            vech_to_sym(theta, 2))


def _build_3d(theta):
    t = np.r_[0.0, theta]  # 1-based like the parameter labels
    A2 = np.array([[t[1], t[2], 0.0, t[3]],
                   [0.0, 0.0, 1.0, 0.0],
                   [t[4], t[5], t[6], t[7]],
                   [t[8], t[9], t[10], t[11]]])
    B2 = np.array([[t[1], t[2], t[3]],
                   [t[12], t[13], t[14]],
                   [t[4] + t[6] * t[12], t[5] + t[6] * t[13], t[7] + t[6] * t[14]],
                   [t[8] + t[10] * t[12], t[9] + t[10] * t[13], t[11] + t[10] * t[14]]])
    C2 = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 0, 1.0]])
    B1 = np.array([[t[15], t[16], t[17]], [t[18], t[19], t[20]]])
    S = vech_to_sym(t[21:27], 3)
    return A2, B1, B2, c1_3d(t[27], t[28]), C2, S


def _sigma_bounds(m):
    lo, up = [], []
    for j in range(m):
        for i in range(j, m):
            lo.append(0.05 if i == j else -1.0)
            up.append(2.0 if i == j else 1.0)
    return np.array(lo), np.array(up)


def _names(n, offset=0):
    return tuple(f"theta_{i + 1 + offset}" for i in range(n))


def canonical2d():
    slo, sup = _sigma_bounds(2)
    lower = np.r_[THETA0_2D[:9] - 2.0, slo, 1.5]
    upper = np.r_[THETA0_2D[:9] + 2.0, sup, 6.0]
    return ModelSpec("canonical2d", d=2, c=1, N=4, m=2, lower=lower, upper=upper,
                     long_idx=(12,), builder=_build_2d, theta0=THETA0_2D.copy(),
                     param_names=_names(13), sigma_idx=(9, 10, 11))


def canonical2d_wrong():
    """Cointegrated, but with the cointegration space fixed by ``C1 = (0, 1)'``."""
    base = canonical2d()
    keep = list(range(12))
    return ModelSpec("canonical2d_wrong", d=2, c=1, N=4, m=2, lower=base.lower[keep],
                     upper=base.upper[keep], long_idx=(),
                     builder=partial(_build_2d_fixed_c1, c1=(0.0, 1.0)),
                     theta0=THETA0_2D[keep], param_names=_names(12), sigma_idx=(9, 10, 11))


def canonical2d_stationary():
    """``C1 = 0``: the observed process is the stationary part alone (c = 0, N = 3)."""
    base = canonical2d()
    keep = list(range(7)) + [9, 10, 11]
    return ModelSpec("canonical2d_stationary", d=2, c=0, N=3, m=2, lower=base.lower[keep],
                     upper=base.upper[keep], long_idx=(), builder=_build_2d_stationary,
                     theta0=THETA0_2D[keep], sigma_idx=(7, 8, 9),
                     param_names=tuple(base.param_names[i] for i in keep))


def canonical2d_integrated():
    """``B2 = 0``: integrated without cointegration, a bivariate random walk (c = d = 2)."""
    slo, sup = _sigma_bounds(2)
    return ModelSpec("canonical2d_integrated", d=2, c=2, N=2, m=2, lower=slo, upper=sup,
                     long_idx=(), builder=_build_2d_integrated, theta0=THETA0_2D[9:12],
                     param_names=_names(3, offset=9), sigma_idx=(0, 1, 2))


def canonical3d():
    slo, sup = _sigma_bounds(3)
    lower = np.r_[THETA0_3D[:20] - 2.0, slo, 0.2, 0.5]
    upper = np.r_[THETA0_3D[:20] + 2.0, sup, 3.0, 5.0]
    return ModelSpec("canonical3d", d=3, c=2, N=6, m=3, lower=lower, upper=upper,
                     long_idx=(26, 27), builder=_build_3d, theta0=THETA0_3D.copy(),
                     param_names=_names(28), sigma_idx=tuple(range(20, 26)))


def _build_car1(theta):
    return (np.array([[-theta[0]]]), np.zeros((0, 1)), np.ones((1, 1)), np.zeros((1, 0)),
            np.ones((1, 1)), np.array([[theta[1]]]))


def car1():
    """Scalar CAR(1) ``dX = -a X dt + dL``, ``Y = X``; parameters ``(a, Var L(1))``."""
    return ModelSpec("car1", d=1, c=0, N=1, m=1, lower=[0.05, 0.05], upper=[5.0, 5.0],
                     long_idx=(), builder=_build_car1, theta0=np.array([1.0, 1.0]),
                     param_names=("a", "sigma2"), sigma_idx=(1,))


MODELS = {
    "canonical2d": canonical2d,
    "canonical2d_wrong": canonical2d_wrong,
    "canonical2d_stationary": canonical2d_stationary,
    "canonical2d_integrated": canonical2d_integrated,
    "canonical3d": canonical3d,
    "car1": car1,
}

# misspecification spaces of the bivariate study, in table order
MISSPEC_SPACES = {
    "Theta": "canonical2d",
    "Theta_I": "canonical2d_integrated",
    "Theta_W": "canonical2d_wrong",
    "Theta_S": "canonical2d_stationary",
}


def get_model(name):
    try:
        return MODELS[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def default_driver(model_name, kind):
    """Driver used by the simulation study for a shipped model (``brownian`` or ``nig``)."""
    from .levy import Brownian
    spec = get_model(model_name)
    if kind == "nig":
        if model_name.startswith("canonical2d"):
            return nig_driver_2d()
        if model_name == "canonical3d":
            return nig_driver_3d()
        raise ValueError(f"no NIG driver defined for {model_name}")
    if kind != "brownian":
        raise ValueError(f"unknown driver kind {kind!r}")
    return Brownian(spec.build(spec.theta0).Sigma_L)


# ---------------------------------------------------------------------------
# user-defined templates

_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Call)
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin,
          "cos": math.cos, "tanh": math.tanh}


def _compile_entry(entry, s):
    if isinstance(entry, (int, float)):
        return float(entry)
    tree = ast.parse(str(entry), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax in template entry {entry!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ValueError(f"unsupported function in {entry!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS:
            if not (node.id.startswith("t") and node.id[1:].isdigit() and 1 <= int(node.id[1:]) <= s):
                raise ValueError(f"unknown name {node.id!r} in {entry!r}")
    return compile(tree, "<template>", "eval")


class TemplateBuilder:
    """Evaluate matrix templates; picklable so it can cross process boundaries."""

    KEYS = ("A2", "B1", "B2", "C1", "C2", "Sigma_L")

    def __init__(self, templates, s):
        self.templates = {k: templates[k] for k in self.KEYS}
        self.s = s
        self._compiled = None

    def __getstate__(self):
        return {"templates": self.templates, "s": self.s}

    def __setstate__(self, state):
        self.__init__(state["templates"], state["s"])

    def _compile(self):
        self._compiled = {k: [[_compile_entry(e, self.s) for e in row] for row in rows]
                          for k, rows in self.templates.items()}

    def __call__(self, theta):
        if self._compiled is None:
            self._compile()
        env = dict(_FUNCS)
        env.update({f"t{i + 1}": float(v) for i, v in enumerate(theta)})
        out = []
        for k in self.KEYS:
            rows = self._compiled[k]
            M = np.array([[e if isinstance(e, float) else eval(e, {"__builtins__": {}}, env)
                           for e in row] for row in rows], dtype=float)
            out.append(M)
        return tuple(out)


def spec_from_dict(d):
    """Build a :class:`ModelSpec` from a mapping.

    Required keys: ``name``, ``d``, ``c``, ``N``, ``m``, ``lower``, ``upper``,
    ``long_idx`` (1-based), and ``matrices`` holding the six templates. Empty
    blocks are written as ``[]`` rows with the right count, e.g. ``B1: []``
    for ``c = 0``.
    """
    s = len(d["lower"])
    mats = dict(d["matrices"])
    dims = {"A2": (d["N"] - d["c"], d["N"] - d["c"]), "B1": (d["c"], d["m"]),
            "B2": (d["N"] - d["c"], d["m"]), "C1": (d["d"], d["c"]),
            "C2": (d["d"], d["N"] - d["c"]), "Sigma_L": (d["m"], d["m"])}
    for k, (r, c) in dims.items():
        rows = mats.get(k, [])
        if r and c == 0:
            rows = [[] for _ in range(r)]
        if len(rows) != r or any(len(row) != c for row in rows):
            raise ValueError(f"template {k} must be {r}x{c}")
        mats[k] = rows
    return ModelSpec(d["name"], d=d["d"], c=d["c"], N=d["N"], m=d["m"],
                     lower=d["lower"], upper=d["upper"],
                     long_idx=[i - 1 for i in d.get("long_idx", [])],
                     builder=TemplateBuilder(mats, s),
                     theta0=d.get("theta0"), param_names=d.get("param_names"),
                     sigma_idx=[i - 1 for i in d.get("sigma_idx", [])], source=dict(d))
