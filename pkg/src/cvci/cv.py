"""Choose the weight ``lambda`` by K-fold cross-validation on the experimental data.

Only the experimental units are split. For every fold ``k`` the weighted model
is fitted on the other folds plus all observational data, and its treatment
coordinate is scored against the experimental estimate computed on fold ``k``
alone. The grid point with the smallest average score is refitted on
everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import CAUSAL_INDEX, CausalDataset
from .erm import (
    CustomLoss,
    ObsLossSpec,
    QuadraticObs,
    SquaredError,
    WeightedFit,
    fit_generic,
    fit_linear,
    fit_no_covariate,
    solve_linear_batch,
)
from .errors import ConfigError, EmptyArm, LambdaOutOfRange, TooFewPerArm, TooFewUnits
from .experimental import EstimatorKind, ExpEstimate, estimate

DEFAULT_GRID_SIZE = 50
DEFAULT_K = 5


class Mode(str, Enum):
    """How the two sources are combined.

    ``two_arm``: full linear outcome model on the observational design.
    ``control_arm_only``: combine control-arm means; the ATE is the experimental
    treated mean minus the combined control mean.
    ``mean``: combine plain outcome means (single-arm, no covariates).
    """

    TWO_ARM = "two_arm"
    CONTROL_ARM_ONLY = "control_arm_only"
    MEAN = "mean"


@dataclass(frozen=True)
class EstimatorConfig:
    mode: Mode = Mode.TWO_ARM
    estimator: EstimatorKind = EstimatorKind.DIFF_IN_MEANS
    loss: ObsLossSpec = field(default_factory=SquaredError)
    solver: str = "closed_form"
    propensity: float = 0.5
    with_intercept: bool = True
    stratified: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        if self.solver not in ("closed_form", "newton"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if isinstance(self.loss, CustomLoss) and self.solver != "newton":
            object.__setattr__(self, "solver", "newton")

    @property
    def exp_kind(self) -> EstimatorKind:
        if self.mode is Mode.MEAN:
            return EstimatorKind.MEAN
        if self.mode is Mode.CONTROL_ARM_ONLY:
            return EstimatorKind.CONTROL_MEAN
        return self.estimator

    @property
    def stratify(self) -> bool:
        if self.stratified is not None:
            return self.stratified
        return self.mode is not Mode.MEAN


def default_grid(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


def default_k(config: EstimatorConfig, exp: CausalDataset) -> int:
    """Leave-one-out for plain means, five folds otherwise."""
    return exp.n if config.mode is Mode.MEAN else DEFAULT_K


@dataclass(frozen=True, eq=False)
class FoldPlan:
    K: int
    assignments: np.ndarray
    stratified: bool
    seed: int

    def held_out(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == k)

    def held_in(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != k)


@dataclass(frozen=True, eq=False)
class CvResult:
    grid: np.ndarray
    cv_values: np.ndarray
    lambda_hat: float
    final_fit: WeightedFit
    fold_plan: FoldPlan
    tau_exp: ExpEstimate
    ate: float
    config: EstimatorConfig

    @property
    def beta(self) -> float:
        return self.final_fit.beta


def make_folds(data: CausalDataset, K: int, stratified: bool = True, seed: int = 0) -> FoldPlan:
    """Random fold assignment; stratified plans shuffle each arm and deal it round-robin."""
    n = data.n
    if K < 2 or K > n:
        raise TooFewUnits(f"need 2 <= K <= {n} experimental units, got K={K}")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=int)
    if stratified:
        offset = 0
        for name, arm in (("treated", data.treated), ("control", data.controls)):
            if arm.size < K:
                raise TooFewPerArm(f"{name} arm has {arm.size} units, fewer than K={K}")
            perm = rng.permutation(arm)
            assign[perm] = (offset + np.arange(arm.size)) % K
            offset = (offset + arm.size) % K
    else:
        perm = rng.permutation(n)
        assign[perm] = np.arange(n) % K
    assign.flags.writeable = False
    return FoldPlan(K, assign, stratified, seed)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ConfigError("lambda grid is empty")
    if np.any(np.diff(grid) < 0):
        raise ConfigError("lambda grid must be sorted ascending")
    if grid[0] < 0 or grid[-1] > 1:
        raise LambdaOutOfRange(f"lambda grid must lie in [0, 1], got [{grid[0]}, {grid[-1]}]")
    return grid


def _seed(base: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base), *keys])


class _Problem:
    """Experimental and observational data plus the cached observational statistics."""

    def __init__(self, exp: CausalDataset, obs: CausalDataset, config: EstimatorConfig):
        self.exp, self.obs, self.config = exp, obs, config
        mode = config.mode
        if mode is Mode.MEAN:
            self.ybar_obs = float(np.mean(obs.y))
        elif mode is Mode.CONTROL_ARM_ONLY:
            c = obs.controls
            if c.size == 0:
                raise EmptyArm("observational data has no control unit")
            self.ybar_obs = float(np.mean(obs.y[c]))
        elif config.solver == "closed_form":
            self.quad = QuadraticObs.from_data(obs, config.loss, config.with_intercept)

    def exp_estimate(self, subset, seed) -> ExpEstimate:
        c = self.config
        return estimate(self.exp, c.exp_kind, subset, c.propensity, seed)

    def betas(self, grid: np.ndarray, tau: float) -> np.ndarray:
        """Treatment coordinate of the weighted fit at every grid point."""
        if self.config.mode is not Mode.TWO_ARM:
            return (1.0 - grid) * tau + grid * self.ybar_obs
        if self.config.solver == "closed_form":
            return solve_linear_batch(grid, tau, self.quad)[:, CAUSAL_INDEX]
        return np.array([self.fit(lam, tau).beta for lam in grid])

    def fit(self, lam: float, tau: float) -> WeightedFit:
        c = self.config
        if c.mode is not Mode.TWO_ARM:
            return fit_no_covariate(lam, tau, self.ybar_obs)
        if c.solver == "closed_form":
            return fit_linear(lam, tau, self.obs, c.loss, c.with_intercept, quad=self.quad)
        return fit_generic(lam, tau, self.obs, c.loss, c.with_intercept)

    def ate(self, beta: float) -> float:
        if self.config.mode is Mode.CONTROL_ARM_ONLY:
            t = self.exp.treated
            if t.size == 0:
                raise EmptyArm("experimental data has no treated unit")
            return float(np.mean(self.exp.y[t])) - beta
        return beta


def _fold_estimates(problem: _Problem, plan: FoldPlan):
    """Experimental estimates on every held-in set and every held-out fold."""
    kind = problem.config.exp_kind
    if kind in (EstimatorKind.MEAN, EstimatorKind.CONTROL_MEAN):
        return _fold_means(problem.exp, plan, kind is EstimatorKind.CONTROL_MEAN)
    tau_in, tau_out = np.empty(plan.K), np.empty(plan.K)
    for k in range(plan.K):
        try:
            tau_in[k] = problem.exp_estimate(plan.held_in(k), _seed(plan.seed, k, 0)).tau_hat
            tau_out[k] = problem.exp_estimate(plan.held_out(k), _seed(plan.seed, k, 1)).tau_hat
        except EmptyArm as exc:
            raise EmptyArm(f"fold {k}: {exc}") from exc
    return tau_in, tau_out


def _fold_means(exp: CausalDataset, plan: FoldPlan, controls_only: bool):
    """Held-in and held-out (control) means for all folds from per-fold sums."""
    keep = exp.w == 0 if controls_only else np.ones(exp.n, dtype=bool)
    what = "control unit" if controls_only else "unit"
    a = plan.assignments[keep]
    sums = np.bincount(a, weights=exp.y[keep], minlength=plan.K)
    counts = np.bincount(a, minlength=plan.K)
    n_in = counts.sum() - counts
    for k in range(plan.K):
        if counts[k] == 0:
            raise EmptyArm(f"fold {k}: held-out fold has no {what}")
        if n_in[k] == 0:
            raise EmptyArm(f"fold {k}: held-in folds have no {what}")
    return (sums.sum() - sums) / n_in, sums / counts


def _cv_curve(problem: _Problem, plan: FoldPlan, grid: np.ndarray) -> np.ndarray:
    tau_in, tau_out = _fold_estimates(problem, plan)
    sq = np.empty((plan.K, grid.size))
    for k in range(plan.K):
        sq[k] = (problem.betas(grid, tau_in[k]) - tau_out[k]) ** 2
    return sq.mean(axis=0)


def cv_objective(lam: float, exp: CausalDataset, obs: CausalDataset, plan: FoldPlan,
                 config: EstimatorConfig = EstimatorConfig()) -> float:
    """Average held-out squared error of the treatment coordinate at one ``lam``."""
    grid = _check_grid([lam])
    return float(_cv_curve(_Problem(exp, obs, config), plan, grid)[0])


def select_lambda(exp: CausalDataset, obs: CausalDataset, plan: FoldPlan, grid=None,
                  config: EstimatorConfig = EstimatorConfig()) -> CvResult:
    """Grid-minimise the CV objective (first minimiser wins ties) and refit on all data."""
    grid = _check_grid(default_grid() if grid is None else grid)
    problem = _Problem(exp, obs, config)
    values = _cv_curve(problem, plan, grid)
    i = int(np.argmin(values))
    lam_hat = float(grid[i])
    tau_all = problem.exp_estimate(None, _seed(plan.seed, plan.K, 2))
    final = problem.fit(lam_hat, tau_all.tau_hat)
    values.flags.writeable = False
    grid.flags.writeable = False
    return CvResult(grid, values, lam_hat, final, plan, tau_all,
                    problem.ate(final.beta), config)


def cvci_estimate(exp: CausalDataset, obs: CausalDataset, K: int | None = None, grid=None,
                  config: EstimatorConfig = EstimatorConfig(), seed: int = 0) -> CvResult:
    """Fold assignment followed by grid selection of lambda and the final refit."""
    K = default_k(config, exp) if K is None else int(K)
    plan = make_folds(exp, K, config.stratify, seed)
    return select_lambda(exp, obs, plan, grid, config)
