"""Estimators packaged as ``method(exp, obs, seed) -> MethodOutput`` for the harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..baselines import DEFAULT_ALPHA, exp_only, obs_only, pool_all, ttest_then_pool
from ..cv import EstimatorConfig, Mode, cvci_estimate


@dataclass(frozen=True)
class MethodOutput:
    estimate: float
    lambda_hat: float | None = None


class Method(Protocol):
    name: str

    def __call__(self, exp, obs, seed: int) -> MethodOutput: ...


def _exp_treated(exp, obs, mode):
    if mode is Mode.MEAN or (mode is Mode.TWO_ARM and obs.treated.size):
        return None
    return exp.subset(exp.treated)


@dataclass(frozen=True)
class ExpOnly:
    config: EstimatorConfig = field(default_factory=EstimatorConfig)
    name: str = "exp_only"

    def __call__(self, exp, obs, seed):
        return MethodOutput(exp_only(exp, self.config, seed).beta, 0.0)


@dataclass(frozen=True)
class ObsOnly:
    mode: Mode = Mode.TWO_ARM
    name: str = "obs_only"

    def __call__(self, exp, obs, seed):
        mode = Mode(self.mode)
        return MethodOutput(obs_only(_exp_treated(exp, obs, mode), obs, mode).beta, 1.0)


@dataclass(frozen=True)
class Pool:
    mode: Mode = Mode.TWO_ARM
    name: str = "pool_all"

    def __call__(self, exp, obs, seed):
        return MethodOutput(pool_all(exp, obs, self.mode).beta)


@dataclass(frozen=True)
class TTest:
    mode: Mode = Mode.MEAN
    alpha: float = DEFAULT_ALPHA
    name: str = "ttest_pool"

    def __call__(self, exp, obs, seed):
        r = ttest_then_pool(exp, obs, self.alpha, self.mode)
        return MethodOutput(r.beta, r.lambda_equivalent)


@dataclass(frozen=True)
class Cvci:
    config: EstimatorConfig = field(default_factory=EstimatorConfig)
    K: int | None = None
    grid: tuple[float, ...] | None = None
    name: str = "cvci"

    def __call__(self, exp, obs, seed):
        grid = None if self.grid is None else np.asarray(self.grid)
        r = cvci_estimate(exp, obs, self.K, grid, self.config, seed)
        return MethodOutput(r.ate, r.lambda_hat)


@dataclass(frozen=True)
class Constant:
    """Returns a fixed value; useful as a perfect-estimator reference."""

    value: float
    name: str = "constant"

    def __call__(self, exp, obs, seed):
        return MethodOutput(float(self.value))


def default_methods(mode: Mode, config: EstimatorConfig | None = None) -> list:
    """The standard comparison panel for a mode."""
    mode = Mode(mode)
    config = EstimatorConfig(mode=mode) if config is None else config
    methods = [ExpOnly(config), ObsOnly(mode), Pool(mode), Cvci(config)]
    if mode is not Mode.TWO_ARM:
        methods.append(TTest(mode))
    return methods
