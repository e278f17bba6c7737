"""Synthetic and semi-synthetic two-source data generators."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from ..data import CausalDataset, ModelParams, Source, design_matrix
from ..errors import ConfigError
from ..experimental import fit_ols
from .rng import stream


class Setting(str, Enum):
    NO_COVARIATE = "no_covariate"
    LINEAR = "linear"


@dataclass(frozen=True)
class SimScenario:
    """One simulation design.

    ``d`` counts random covariates; the intercept column is added by the
    estimators with a zero true coefficient. Leaving ``theta_exp`` unset draws
    fresh ``N(0, I)`` weights per dataset; ``same_theta`` then reuses them for
    the observational source.
    """

    setting: Setting = Setting.NO_COVARIATE
    tau_star: float = 0.5
    epsilon: float = 0.0
    sigma2: float = 1.0
    n_exp: int = 100
    n_obs: int = 5000
    d: int = 5
    theta_exp: tuple[float, ...] | None = None
    theta_obs: tuple[float, ...] | None = None
    same_theta: bool = True
    prop_exp: float = 0.5
    prop_obs: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting(self.setting))
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        for name in ("prop_exp", "prop_obs"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.n_exp < 1 or self.n_obs < 1:
            raise ConfigError("sample sizes must be positive")
        if self.d < 0:
            raise ConfigError(f"d must be nonnegative, got {self.d}")
        for name in ("theta_exp", "theta_obs"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(x) for x in v)
                if len(v) != self.d:
                    raise ConfigError(f"{name} has length {len(v)}, expected d={self.d}")
                object.__setattr__(self, name, v)

    def with_(self, **changes) -> "SimScenario":
        return replace(self, **changes)


def _rng(scenario: SimScenario, rng) -> np.random.Generator:
    return stream(scenario.seed) if rng is None else rng


def gen_no_covariate(scenario: SimScenario, rng: np.random.Generator | None = None):
    """Treated-only samples: ``N(tau, s2)`` experimental and ``N(tau + eps, s2)`` observational."""
    rng = _rng(scenario, rng)
    sd = np.sqrt(scenario.sigma2)
    y_exp = rng.normal(scenario.tau_star, sd, scenario.n_exp)
    y_obs = rng.normal(scenario.tau_star + scenario.epsilon, sd, scenario.n_obs)
    exp = CausalDataset(y_exp, np.ones(scenario.n_exp), None, Source.EXPERIMENTAL)
    obs = CausalDataset(y_obs, np.ones(scenario.n_obs), None, Source.OBSERVATIONAL)
    return exp, obs


def _linear_source(rng, n, prop, theta, effect, sigma2, source):
    sd = np.sqrt(sigma2)
    z = rng.normal(0.0, sd, (n, theta.size))
    w = (rng.random(n) < prop).astype(float)
    y = z @ theta + w * effect + rng.normal(0.0, sd, n)
    return CausalDataset(y, w, z, source)


def gen_linear(scenario: SimScenario, rng: np.random.Generator | None = None):
    """Linear outcomes; the observational treatment effect is shifted by ``epsilon``."""
    rng = _rng(scenario, rng)
    s = scenario
    if s.theta_exp is None:
        th_exp = rng.normal(size=s.d)
    else:
        th_exp = np.array(s.theta_exp)
    if s.theta_obs is not None:
        th_obs = np.array(s.theta_obs)
    elif s.same_theta:
        th_obs = th_exp
    else:
        th_obs = rng.normal(size=s.d)
    exp = _linear_source(rng, s.n_exp, s.prop_exp, th_exp, s.tau_star, s.sigma2, Source.EXPERIMENTAL)
    obs = _linear_source(rng, s.n_obs, s.prop_obs, th_obs, s.tau_star + s.epsilon, s.sigma2,
                         Source.OBSERVATIONAL)
    return exp, obs


def generate(scenario: SimScenario, rng: np.random.Generator | None = None):
    if scenario.setting is Setting.NO_COVARIATE:
        return gen_no_covariate(scenario, rng)
    return gen_linear(scenario, rng)


@dataclass(frozen=True, eq=False)
class ResidualFit:
    """Linear fit on ``[w, z, 1]`` with the mean and variance of its residuals."""

    params: ModelParams
    resid_mean: float
    resid_var: float

    def __post_init__(self):
        if not (np.isfinite(self.resid_mean) and np.isfinite(self.resid_var) and self.resid_var >= 0):
            raise ConfigError("residual mean and variance must be finite, variance nonnegative")


def fit_residual_model(data: CausalDataset) -> ResidualFit:
    X = design_matrix(data)
    params = fit_ols(X, data.y)
    r = data.y - X.X @ params.theta
    var = float(np.var(r, ddof=1)) if data.n > 1 else 0.0
    return ResidualFit(params, float(np.mean(r)), var)


def _resample(fit: ResidualFit, template: CausalDataset, rng) -> CausalDataset:
    mean = design_matrix(template).X @ fit.params.theta
    noise = rng.normal(fit.resid_mean, np.sqrt(fit.resid_var), template.n)
    return CausalDataset(mean + noise, template.w, template.z, template.source,
                         template.covariate_names)


def gen_semisynthetic(exp_fit: ResidualFit, obs_fit: ResidualFit, exp_template: CausalDataset,
                      obs_template: CausalDataset, seed: int = 0,
                      rng: np.random.Generator | None = None):
    """Keep the real covariates and treatments, regenerate outcomes as fit plus Gaussian residual."""
    rng = stream(seed) if rng is None else rng
    return _resample(exp_fit, exp_template, rng), _resample(obs_fit, obs_template, rng)
