"""Experiment configuration: a YAML mapping with a fixed schema.

Example::

    model: canonical2d
    driver: {type: nig}          # or {type: brownian}; explicit parameters allowed
    replicates: 100
    n: 2000
    h: 1.0
    euler_dt: 0.01
    scheme: euler                # or exact-gaussian
    seed: 20240601
    estimator: {starts: 5, method: nelder-mead}
    output: results/brownian
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from ..catalog import MODELS, default_driver, get_model, spec_from_dict
from ..estimate import EstimatorOptions
from ..levy import Brownian, levy_covariance, levy_from_dict

SCHEMES = ("euler", "exact-gaussian")
SPACES = ("Theta", "Theta_I", "Theta_W", "Theta_S")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "nelder-mead"
    starts: int = 5
    start_half_width: float = 0.1
    xtol: float = 1e-8
    ftol: float = 1e-10
    max_evals: int = 20_000
    restarts: int = 1

    def options(self):
        return EstimatorOptions(method=self.method, xtol=self.xtol, ftol=self.ftol,
                                max_evals=self.max_evals, restarts=self.restarts)


@dataclass(frozen=True)
class ExperimentConfig:
    model: Union[str, dict] = "canonical2d"
    driver: dict = field(default_factory=lambda: {"type": "brownian"})
    replicates: int = 100
    n: int = 2000
    h: float = 1.0
    euler_dt: float = 0.01
    scheme: str = "euler"
    burn_in: int = 0
    seed: int = 0
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    output: Optional[str] = None
    sample_sizes: Optional[tuple] = None
    spaces: tuple = SPACES
    divergence_factor: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        if isinstance(self.model, str) and self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; known: {sorted(MODELS)}")
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be at least 1")
        if int(self.n) < 2:
            raise ConfigError("n must be at least 2")
        if not self.h > 0 or not self.euler_dt > 0:
            raise ConfigError("h and euler_dt must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.driver.get("type") not in ("brownian", "nig"):
            raise ConfigError("driver.type must be 'brownian' or 'nig'")
        if self.scheme == "exact-gaussian" and self.driver["type"] != "brownian":
            raise ConfigError("the exact-gaussian scheme needs a Brownian driver")
        unknown = set(self.spaces) - set(SPACES)
        if unknown:
            raise ConfigError(f"unknown parameter spaces {sorted(unknown)}")
        if self.sample_sizes is not None and any(int(k) < 2 for k in self.sample_sizes):
            raise ConfigError("sample sizes must be at least 2")
        try:
            self.estimator.options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.estimator.starts < 1:
            raise ConfigError("estimator.starts must be at least 1")
        try:
            spec = self.spec()
            levy = self.levy()
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"invalid model or driver: {exc}") from None
        if levy.dim != spec.m:
            raise ConfigError(f"driver dimension {levy.dim} differs from the model's m={spec.m}")

    # -- model and driver -------------------------------------------------
    def spec(self):
        return get_model(self.model) if isinstance(self.model, str) else spec_from_dict(self.model)

    def model_name(self):
        return self.model if isinstance(self.model, str) else self.model.get("name", "custom")

    def levy(self):
        """The driving process; bare ``{type: ...}`` picks the study default for the model."""
        d = dict(self.driver)
        if len(d) == 1:
            if isinstance(self.model, str):
                return default_driver(self.model, d["type"])
            if d["type"] == "brownian":
                spec = self.spec()
                return Brownian(spec.build(spec.theta0).Sigma_L)
            raise ConfigError("an inline model needs explicit NIG parameters")
        return levy_from_dict(d)

    def true_theta(self):
        """Data-generating parameter: ``theta0`` with vech(Sigma_L) set to the driver's covariance."""
        spec = self.spec()
        if spec.theta0 is None:
            raise ConfigError("the model has no data-generating value theta0")
        if not spec.sigma_idx:
            return spec.theta0.copy()
        return spec.with_noise_covariance(spec.theta0, levy_covariance(self.levy()))

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        d = asdict(self)
        d["spaces"] = list(self.spaces)
        d["sample_sizes"] = None if self.sample_sizes is None else [int(k) for k in self.sample_sizes]
        return _plain(d)

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    d = dict(d)
    est = d.pop("estimator", None) or {}
    est_known = {f.name for f in fields(EstimatorConfig)}
    if set(est) - est_known:
        raise ConfigError(f"unknown estimator keys {sorted(set(est) - est_known)}")
    try:
        est_cfg = EstimatorConfig(**{k: _cast(EstimatorConfig, k, v) for k, v in est.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "driver" in d and not isinstance(d["driver"], dict):
        d["driver"] = {"type": str(d["driver"])}
    for key in ("spaces", "sample_sizes"):
        if d.get(key) is not None:
            d[key] = tuple(d[key])
    try:
        kw = {k: _cast(ExperimentConfig, k, v) for k, v in d.items()}
        return ExperimentConfig(estimator=est_cfg, **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


_INTS = {"replicates", "n", "burn_in", "seed", "starts", "max_evals", "restarts",
         "divergence_factor"}
_FLOATS = {"h", "euler_dt", "start_half_width", "xtol", "ftol"}


def _cast(_cls, key, value):
    if key in _INTS:
        if isinstance(value, bool) or float(value) != int(value):
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if key in _FLOATS:
        return float(value)
    if key == "sample_sizes" and value is not None:
        return tuple(int(v) for v in value)
    return value


def load_config(path):
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return config_from_dict(data or {})


def loads_config(text):
    try:
        return config_from_dict(yaml.safe_load(text) or {})
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc)) from None
