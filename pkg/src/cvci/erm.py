"""Minimise ``(1 - lam) * Lexp(beta(theta)) + lam * Lobs(theta)`` for a fixed weight.

``Lexp`` is always the squared distance between the treatment coordinate and
an experimental estimate; ``Lobs`` is a per-unit average loss over the
observational design ``[w | z | 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import CAUSAL_INDEX, CausalDataset, DesignMatrix, ModelParams, design_matrix
from .errors import LambdaOutOfRange, NoConvergence, SingularSystem
from .experimental import RANK_TOL, ExpEstimate

GRAD_TOL = 1e-9
MAX_NEWTON_ITER = 200
ARMIJO = 1e-4
MAX_HALVINGS = 60
MAX_RATIO = 1e300


@dataclass(frozen=True)
class Ridge:
    """Mean squared residual plus ``penalty * |theta|^2 / n``; the intercept is not penalised."""

    penalty: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.penalty) or self.penalty < 0:
            raise ValueError(f"ridge penalty must be finite and nonnegative, got {self.penalty}")

    def _pen(self, design: DesignMatrix) -> np.ndarray:
        return self.penalty * design.penalty_mask()

    def value(self, theta, design: DesignMatrix, y) -> float:
        r = y - design.X @ theta
        return float((r @ r + theta @ (self._pen(design) * theta)) / len(y))

    def gradient(self, theta, design: DesignMatrix, y) -> np.ndarray:
        r = y - design.X @ theta
        return 2.0 * (self._pen(design) * theta - design.X.T @ r) / len(y)

    def hessian(self, theta, design: DesignMatrix, y) -> np.ndarray:
        return 2.0 * (design.X.T @ design.X + np.diag(self._pen(design))) / len(y)


@dataclass(frozen=True)
class SquaredError(Ridge):
    """Mean squared residual (the default observational loss)."""

    penalty: float = field(default=0.0, init=False)


@dataclass(frozen=True)
class CustomLoss:
    """User-supplied strongly convex loss: callables of ``(theta, X, y)``."""

    value_fn: Callable
    gradient_fn: Callable
    hessian_fn: Callable

    def value(self, theta, design, y):
        return float(self.value_fn(theta, design.X, y))

    def gradient(self, theta, design, y):
        return np.asarray(self.gradient_fn(theta, design.X, y), dtype=float)

    def hessian(self, theta, design, y):
        return np.asarray(self.hessian_fn(theta, design.X, y), dtype=float)


ObsLossSpec = Ridge | CustomLoss


@dataclass(frozen=True, eq=False)
class WeightedFit:
    lam: float
    theta: ModelParams
    objective_value: float

    @property
    def beta(self) -> float:
        return self.theta.beta


@dataclass(frozen=True, eq=False)
class QuadraticObs:
    """Sufficient statistics of a quadratic ``Lobs``: ``theta'G theta - 2 h'theta + c``."""

    G: np.ndarray
    h: np.ndarray
    c: float

    @classmethod
    def from_data(cls, obs: CausalDataset, loss: Ridge = SquaredError(),
                  with_intercept: bool = True) -> "QuadraticObs":
        design = design_matrix(obs, with_intercept)
        X, y, n = design.X, obs.y, obs.n
        G = (X.T @ X + np.diag(loss.penalty * design.penalty_mask())) / n
        return cls(G, X.T @ y / n, float(y @ y / n))


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRange(f"lambda must lie in [0, 1], got {lam}")
    return lam


def _tau(tau_exp) -> float:
    return tau_exp.tau_hat if isinstance(tau_exp, ExpEstimate) else float(tau_exp)


def _e1(p: int) -> np.ndarray:
    e = np.zeros(p)
    e[CAUSAL_INDEX] = 1.0
    return e


def fit_no_covariate(lam: float, ybar_exp: float, ybar_obs: float) -> WeightedFit:
    """Closed form for a scalar parameter: the convex combination of the two means."""
    lam = _check_lambda(lam)
    theta = (1.0 - lam) * ybar_exp + lam * ybar_obs
    obj = (1.0 - lam) * (ybar_exp - theta) ** 2 + lam * (ybar_obs - theta) ** 2
    return WeightedFit(lam, ModelParams([theta]), obj)


def _ratio(lam):
    """``(1 - lam) / lam``, capped so tiny positive weights stay finite."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.minimum((1.0 - lam) / lam, MAX_RATIO)


def solve_linear_batch(lams, tau: float, quad: QuadraticObs) -> np.ndarray:
    """Rows ``theta(lam)`` for every weight in ``lams`` (see :func:`solve_linear`).

    For ``lam > 0`` the system is divided by ``lam`` and solved as
    ``(c e1 e1' + G) theta = c tau e1 + h`` with ``c = (1 - lam) / lam``, after a
    symmetric diagonal rescaling.
    """
    lams = np.asarray(lams, dtype=float).reshape(-1)
    if np.any((lams < 0) | (lams > 1)):
        raise LambdaOutOfRange(f"lambda must lie in [0, 1], got {lams[(lams < 0) | (lams > 1)][0]}")
    p = quad.h.size
    out = np.zeros((lams.size, p))
    zero = lams == 0.0
    out[zero, CAUSAL_INDEX] = tau
    pos = lams[~zero]
    if pos.size == 0:
        return out
    c = _ratio(pos)
    A = np.repeat(quad.G[None], pos.size, axis=0)
    A[:, CAUSAL_INDEX, CAUSAL_INDEX] += c
    b = np.repeat(quad.h[None], pos.size, axis=0)
    b[:, CAUSAL_INDEX] += c * tau
    diag = np.einsum("gii->gi", A)
    if np.any(diag <= 0):
        raise SingularSystem("weighted system has a zero diagonal entry")
    d = 1.0 / np.sqrt(diag)
    As = A * d[:, :, None] * d[:, None, :]
    s = np.linalg.svd(As, compute_uv=False)
    bad = s[:, -1] <= RANK_TOL * s[:, 0]
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularSystem(
            f"weighted system at lambda={pos[i]} is singular: "
            f"singular value ratio {s[i, -1] / s[i, 0]:.3g} <= tolerance {RANK_TOL:g}"
        )
    out[~zero] = d * np.linalg.solve(As, (d * b)[:, :, None])[:, :, 0]
    return out


def solve_linear(lam: float, tau: float, quad: QuadraticObs) -> np.ndarray:
    """Solve ``((1-lam) e1 e1' + lam G) theta = (1-lam) tau e1 + lam h``.

    At ``lam == 0`` the system has rank one and the minimum-norm solution
    ``tau * e1`` is returned.
    """
    return solve_linear_batch([_check_lambda(lam)], tau, quad)[0]


def weighted_objective(lam: float, theta, tau_exp, obs: CausalDataset,
                       loss: ObsLossSpec = SquaredError(), with_intercept: bool = True) -> float:
    """Evaluate the weighted objective directly from the observational rows."""
    theta = np.asarray(theta, dtype=float)
    design = design_matrix(obs, with_intercept)
    tau = _tau(tau_exp)
    return float((1.0 - lam) * (theta[CAUSAL_INDEX] - tau) ** 2
                 + lam * loss.value(theta, design, obs.y))


def fit_linear(lam: float, tau_exp, obs: CausalDataset, loss: Ridge = SquaredError(),
               with_intercept: bool = True, quad: QuadraticObs | None = None) -> WeightedFit:
    """Closed-form weighted fit for squared-error (optionally ridge) observational loss."""
    if isinstance(loss, CustomLoss):
        raise TypeError("fit_linear needs a quadratic loss; use fit_generic for custom losses")
    lam = _check_lambda(lam)
    tau = _tau(tau_exp)
    if quad is None:
        quad = QuadraticObs.from_data(obs, loss, with_intercept)
    theta = solve_linear(lam, tau, quad)
    obj = weighted_objective(lam, theta, tau, obs, loss, with_intercept)
    return WeightedFit(lam, ModelParams(theta), obj)


def fit_generic(lam: float, tau_exp, obs: CausalDataset, loss: ObsLossSpec = SquaredError(),
                with_intercept: bool = True, max_iter: int = MAX_NEWTON_ITER) -> WeightedFit:
    """Damped Newton from ``theta = 0`` with Armijo backtracking.

    Stops when the gradient norm drops below ``1e-9 * (1 + |theta|)``, or when
    the Newton step itself falls below floating-point resolution.
    """
    lam = _check_lambda(lam)
    tau = _tau(tau_exp)
    design = design_matrix(obs, with_intercept)
    y = obs.y
    p = design.X.shape[1]
    e1 = _e1(p)
    if lam == 0.0:
        theta = tau * e1
        return WeightedFit(lam, ModelParams(theta), 0.0)

    def f(th):
        return (1.0 - lam) * (th[CAUSAL_INDEX] - tau) ** 2 + lam * loss.value(th, design, y)

    theta = np.zeros(p)
    fval = f(theta)
    gnorm = np.inf
    for _ in range(max_iter + 1):
        gl = loss.gradient(theta, design, y)
        g = lam * gl
        g[CAUSAL_INDEX] += 2.0 * (1.0 - lam) * (theta[CAUSAL_INDEX] - tau)
        gnorm = float(np.linalg.norm(g))
        scale = 1.0 + float(np.linalg.norm(theta))
        if gnorm <= GRAD_TOL * scale:
            break
        # Newton direction from the objective divided by lam, which keeps the
        # system well scaled when lam is tiny
        c = float(_ratio(lam))
        gs = gl.copy()
        gs[CAUSAL_INDEX] += 2.0 * c * (theta[CAUSAL_INDEX] - tau)
        H = loss.hessian(theta, design, y)
        H[CAUSAL_INDEX, CAUSAL_INDEX] += 2.0 * c
        try:
            step = -np.linalg.solve(H, gs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"Newton system at lambda={lam} is singular") from exc
        if np.linalg.norm(step) <= 1e-12 * scale:
            break
        slope = float(g @ step)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = theta + t * step
            fc = f(cand)
            if fc <= fval + ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            raise NoConvergence(
                f"line search failed at lambda={lam}; gradient norm {gnorm:.3g}", gnorm)
        theta, fval = cand, fc
    else:
        raise NoConvergence(
            f"no convergence after {max_iter} Newton iterations; gradient norm {gnorm:.3g}", gnorm)
    return WeightedFit(lam, ModelParams(theta), float(fval))
