"""Experimental ATE estimators written as averages of per-unit values ``phi``.

Every estimator here returns an :class:`ExpEstimate` whose ``tau_hat`` is the
mean of its ``phi`` vector, which is what lets the squared experimental loss
be rewritten as a unit-level average.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import CausalDataset, DesignMatrix, ModelParams
from .errors import DegeneratePropensity, EmptyArm, SingularDesign

#: relative singular-value tolerance for rank decisions
RANK_TOL = 1e-10


class EstimatorKind(str, Enum):
    DIFF_IN_MEANS = "diff_in_means"
    PLUG_IN = "plug_in"
    AIPW = "aipw"
    # single-parameter modes used by the no-covariate setting
    MEAN = "mean"
    CONTROL_MEAN = "control_mean"


@dataclass(frozen=True, eq=False)
class ExpEstimate:
    tau_hat: float
    phi: np.ndarray
    kind: EstimatorKind

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).reshape(-1)
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "tau_hat", float(self.tau_hat))
        object.__setattr__(self, "kind", EstimatorKind(self.kind))


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    """Linear outcome model ``mu(w, z) = coef . [w, z, 1]``."""

    coef: np.ndarray

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float).reshape(-1)
        if not np.all(np.isfinite(coef)):
            raise SingularDesign("outcome model: non-finite coefficients")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)

    def predict(self, w, z) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float).reshape(len(w), -1)
        return self.coef[0] * w + z @ self.coef[1:-1] + self.coef[-1]

    @classmethod
    def zeros(cls, d: int) -> "OutcomeModel":
        return cls(np.zeros(d + 2))


@dataclass(frozen=True, eq=False)
class PropensitySpec:
    """Known treatment probability: one constant or one value per unit."""

    value: float | np.ndarray = 0.5

    def __post_init__(self):
        v = np.array(self.value, dtype=float)
        if v.size == 0 or not np.all((v > 0) & (v < 1)):
            raise DegeneratePropensity(f"propensity must lie strictly inside (0, 1), got {self.value!r}")
        v.flags.writeable = False
        object.__setattr__(self, "value", v)

    def at(self, idx: np.ndarray) -> np.ndarray:
        if self.value.ndim == 0:
            return np.full(len(idx), float(self.value))
        return self.value[idx]


def _column_scale(X: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    return np.where(norms > 0, norms, 1.0)


def fit_ols(X: DesignMatrix | np.ndarray, y) -> ModelParams:
    """Least-squares fit of ``y`` on the columns of ``X``.

    Columns are rescaled to unit norm before the rank check, so the
    tolerance is insensitive to the units covariates are measured in.
    """
    X = X.X if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p:
        raise SingularDesign(f"design has {n} rows for {p} columns")
    scale = _column_scale(X)
    Xs = X / scale
    s = np.linalg.svd(Xs, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise SingularDesign(
            f"collinear design: singular value ratio {s[-1] / s[0]:.3g} <= tolerance {RANK_TOL:g}"
        )
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    return ModelParams(coef / scale)


def fit_outcome_model(data: CausalDataset, subset=None, min_norm: bool = False) -> OutcomeModel:
    """Fit ``mu`` by least squares of y on ``[w, z, 1]`` over ``subset``.

    Covariates that are constant on the subset duplicate the intercept and get
    a zero coefficient. With ``min_norm`` any remaining rank deficiency is
    resolved by the minimum-norm solution instead of raising.
    """
    idx = np.arange(data.n) if subset is None else np.asarray(subset, dtype=int)
    z = data.z[idx]
    keep = np.ptp(z, axis=0) > 0 if z.shape[0] else np.zeros(data.d, dtype=bool)
    X = np.column_stack([data.w[idx], z[:, keep], np.ones(len(idx))])
    if min_norm:
        sub, *_ = np.linalg.lstsq(X, data.y[idx], rcond=None)
    else:
        sub = fit_ols(X, data.y[idx]).theta
    coef = np.zeros(data.d + 2)
    coef[0] = sub[0]
    coef[1:-1][keep] = sub[1:-1]
    coef[-1] = sub[-1]
    return OutcomeModel(coef)


def _indices(data: CausalDataset, subset) -> np.ndarray:
    return np.arange(data.n) if subset is None else np.asarray(subset, dtype=int)


def _arms(data: CausalDataset, idx: np.ndarray):
    t = idx[data.w[idx] == 1]
    c = idx[data.w[idx] == 0]
    if t.size == 0 or c.size == 0:
        raise EmptyArm(f"subset of {idx.size} units has {t.size} treated and {c.size} control")
    return t, c


def diff_in_means(data: CausalDataset, subset=None) -> ExpEstimate:
    idx = _indices(data, subset)
    t, c = _arms(data, idx)
    y = data.y[idx]
    treated = data.w[idx] == 1
    phi = np.where(treated, idx.size / t.size * y, -idx.size / c.size * y)
    tau = data.y[t].mean() - data.y[c].mean()
    return ExpEstimate(tau, phi, EstimatorKind.DIFF_IN_MEANS)


def mean_outcome(data: CausalDataset, subset=None) -> ExpEstimate:
    """Sample mean of y: the estimand when every unit shares one arm."""
    idx = _indices(data, subset)
    if idx.size == 0:
        raise EmptyArm("empty subset")
    phi = data.y[idx]
    return ExpEstimate(phi.mean(), phi, EstimatorKind.MEAN)


def control_mean(data: CausalDataset, subset=None) -> ExpEstimate:
    idx = _indices(data, subset)
    c = idx[data.w[idx] == 0]
    if c.size == 0:
        raise EmptyArm(f"subset of {idx.size} units has no control unit")
    phi = data.y[c]
    return ExpEstimate(phi.mean(), phi, EstimatorKind.CONTROL_MEAN)


def plugin_ate(data: CausalDataset, subset, model: OutcomeModel) -> ExpEstimate:
    idx = _indices(data, subset)
    if idx.size == 0:
        raise EmptyArm("empty subset")
    z = data.z[idx]
    n = idx.size
    phi = model.predict(np.ones(n), z) - model.predict(np.zeros(n), z)
    return ExpEstimate(phi.mean(), phi, EstimatorKind.PLUG_IN)


def aipw_ate(data: CausalDataset, subset, model: OutcomeModel, prop: PropensitySpec) -> ExpEstimate:
    """Doubly robust AIPW with the residual weighted by ``w/pi`` and ``(1-w)/(1-pi)``."""
    idx = _indices(data, subset)
    if idx.size == 0:
        raise EmptyArm("empty subset")
    y, w, z = data.y[idx], data.w[idx], data.z[idx]
    pi = prop.at(idx)
    mu1 = model.predict(np.ones(idx.size), z)
    mu0 = model.predict(np.zeros(idx.size), z)
    phi = (w / pi * (y - mu1) + mu1) - ((1 - w) / (1 - pi) * (y - mu0) + mu0)
    return ExpEstimate(phi.mean(), phi, EstimatorKind.AIPW)


def stratified_halves(data: CausalDataset, idx: np.ndarray, seed) -> tuple[np.ndarray, np.ndarray]:
    """Split ``idx`` in two, halving each treatment arm separately."""
    rng = np.random.default_rng(seed)
    first, second = [], []
    for arm in (idx[data.w[idx] == 1], idx[data.w[idx] == 0]):
        if arm.size < 2:
            raise EmptyArm(f"cross-fitting needs two units per arm, found an arm with {arm.size}")
        perm = rng.permutation(arm)
        first.append(perm[: arm.size // 2])
        second.append(perm[arm.size // 2:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def cross_fit_aipw(data: CausalDataset, prop: PropensitySpec, seed, subset=None) -> ExpEstimate:
    """AIPW with the outcome model fitted on one treatment-stratified half and
    evaluated on the other."""
    idx = _indices(data, subset)
    fit_half, eval_half = stratified_halves(data, idx, seed)
    model = fit_outcome_model(data, fit_half, min_norm=True)
    return aipw_ate(data, eval_half, model, prop)


def estimate(data: CausalDataset, kind: EstimatorKind | str, subset=None,
             propensity: float = 0.5, seed=0) -> ExpEstimate:
    """Dispatch to the estimator named by ``kind`` on ``subset``."""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.DIFF_IN_MEANS:
        return diff_in_means(data, subset)
    if kind is EstimatorKind.MEAN:
        return mean_outcome(data, subset)
    if kind is EstimatorKind.CONTROL_MEAN:
        return control_mean(data, subset)
    if kind is EstimatorKind.PLUG_IN:
        idx = _indices(data, subset)
        _arms(data, idx)
        return plugin_ate(data, idx, fit_outcome_model(data, idx))
    return cross_fit_aipw(data, PropensitySpec(propensity), seed, subset)


__all__ = [
    "EstimatorKind", "ExpEstimate", "OutcomeModel", "PropensitySpec", "fit_ols",
    "fit_outcome_model", "diff_in_means", "mean_outcome", "control_mean", "plugin_ate",
    "aipw_ate", "cross_fit_aipw", "stratified_halves", "estimate",
]
