"""Single-source, pooled and test-then-pool reference estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import stdtr

from .cv import EstimatorConfig, Mode
from .data import CausalDataset, Source, concat, design_matrix
from .erm import fit_no_covariate
from .errors import DegenerateVariance, EmptyArm, TooFewUnits
from .experimental import estimate, fit_ols

DEFAULT_ALPHA = 0.05


class BaselineKind(str, Enum):
    EXP_ONLY = "exp_only"
    OBS_ONLY = "obs_only"
    POOL_ALL = "pool_all"
    TTEST_POOL = "ttest_pool"


@dataclass(frozen=True)
class BaselineResult:
    """``beta`` is the method's treatment-effect estimate."""

    kind: BaselineKind
    beta: float
    lambda_equivalent: float | None
    detail: dict = field(default_factory=dict)


def _ols_beta(data: CausalDataset) -> float:
    return fit_ols(design_matrix(data), data.y).beta


def _mean(y, what: str) -> float:
    if y.size == 0:
        raise EmptyArm(f"no {what} unit")
    return float(np.mean(y))


def exp_only(exp: CausalDataset, config: EstimatorConfig = EstimatorConfig(),
             seed: int = 0) -> BaselineResult:
    """The configured experimental estimator on all experimental units."""
    if config.mode is Mode.MEAN:
        kind = "mean"
    elif config.mode is Mode.CONTROL_ARM_ONLY:
        kind = "diff_in_means"
    else:
        kind = config.estimator
    est = estimate(exp, kind, None, config.propensity, seed)
    return BaselineResult(BaselineKind.EXP_ONLY, est.tau_hat, 0.0, {"estimator": est.kind.value})


def obs_only(exp_treated: CausalDataset | None, obs: CausalDataset,
             mode: Mode = Mode.TWO_ARM) -> BaselineResult:
    """Observational-only estimate.

    ``two_arm``: OLS treatment coefficient on the observational rows, joined by
    ``exp_treated`` when given. ``control_arm_only``: treated mean of
    ``exp_treated`` minus the observational control mean. ``mean``: the
    observational outcome mean.
    """
    mode = Mode(mode)
    if mode is Mode.MEAN:
        return BaselineResult(BaselineKind.OBS_ONLY, _mean(obs.y, "observational"), 1.0,
                              {"n": obs.n})
    if mode is Mode.CONTROL_ARM_ONLY:
        if exp_treated is None:
            raise EmptyArm("control_arm_only needs the experimental treated arm")
        beta = _mean(exp_treated.y[exp_treated.treated], "treated") - _mean(
            obs.y[obs.controls], "observational control")
        return BaselineResult(BaselineKind.OBS_ONLY, beta, 1.0, {"n": obs.n})
    data = obs if exp_treated is None else concat(
        [exp_treated.with_source(Source.OBSERVATIONAL), obs], Source.OBSERVATIONAL)
    return BaselineResult(BaselineKind.OBS_ONLY, _ols_beta(data), 1.0, {"n": data.n})


def pool_all(exp: CausalDataset, obs: CausalDataset, mode: Mode = Mode.TWO_ARM) -> BaselineResult:
    """Treat both sources as one sample: OLS treatment coefficient on every row.

    In the single-parameter modes the pooled (control) mean replaces the
    regression, whose treatment column would otherwise be degenerate.
    """
    mode = Mode(mode)
    data = concat([exp, obs.with_source(Source.EXPERIMENTAL)], Source.EXPERIMENTAL)
    if mode is Mode.MEAN:
        beta = _mean(data.y, "")
    elif mode is Mode.CONTROL_ARM_ONLY:
        beta = _mean(exp.y[exp.treated], "treated") - _mean(data.y[data.controls], "control")
    else:
        beta = _ols_beta(data)
    return BaselineResult(BaselineKind.POOL_ALL, beta, None, {"n": data.n})


def welch_test(a, b) -> tuple[float, float]:
    """Two-sided Welch t statistic and p-value."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise TooFewUnits(f"Welch test needs two units per sample, got {a.size} and {b.size}")
    if np.var(a) == 0 and np.var(b) == 0:
        raise DegenerateVariance("both samples have zero variance")
    va, vb = np.var(a, ddof=1) / a.size, np.var(b, ddof=1) / b.size
    se2 = va + vb
    t = (a.mean() - b.mean()) / np.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return float(t), float(2.0 * stdtr(df, -abs(t)))


def ttest_then_pool(exp: CausalDataset, obs: CausalDataset, alpha: float = DEFAULT_ALPHA,
                    mode: Mode = Mode.MEAN) -> BaselineResult:
    """Welch test of equal means; on rejection weight sources by sample size, else use the experiment.

    ``mode='mean'`` compares all outcomes. The control-arm modes compare the
    two control arms and report the experimental treated mean minus the
    combined control mean.
    """
    mode = Mode(mode)
    if mode is Mode.MEAN:
        a, b = exp.y, obs.y
    else:
        a, b = exp.y[exp.controls], obs.y[obs.controls]
    if a.size == 0 or b.size == 0:
        raise EmptyArm("t-test needs nonempty samples from both sources")
    t, p = welch_test(a, b)
    reject = alpha > 0 and p <= alpha
    lam = b.size / (a.size + b.size) if reject else 0.0
    fit = fit_no_covariate(lam, float(a.mean()), float(b.mean()))
    beta = fit.beta
    if mode is not Mode.MEAN:
        t_idx = exp.treated
        if t_idx.size == 0:
            raise EmptyArm("experimental data has no treated unit")
        beta = float(exp.y[t_idx].mean()) - beta
    detail = {"t": t, "p": p, "alpha": float(alpha), "reject": bool(reject),
              "basis": "outcome" if mode is Mode.MEAN else "control"}
    return BaselineResult(BaselineKind.TTEST_POOL, beta, float(lam), detail)
