"""Datasets, parameter vectors and design matrices shared by all estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ColumnMismatch, LengthMismatch, NonBinaryTreatment, NonFiniteValue

#: coordinate of theta holding the treatment coefficient
CAUSAL_INDEX = 0


class Source(str, Enum):
    EXPERIMENTAL = "experimental"
    OBSERVATIONAL = "observational"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def _as_matrix(z, n: int) -> np.ndarray:
    if z is None:
        return np.zeros((n, 0))
    if isinstance(z, np.ndarray):
        if z.ndim == 1:
            return z.reshape(-1, 1) if z.size else np.zeros((n, 0))
        return z
    rows = list(z)
    if not rows:
        return np.zeros((0, 0))
    widths = [len(r) for r in rows]
    for i, wd in enumerate(widths):
        if wd != widths[0]:
            raise LengthMismatch(
                f"z: row {i} has {wd} columns, expected {widths[0]} (row 0)"
            )
    return np.asarray(rows, dtype=float).reshape(len(rows), widths[0])


@dataclass(frozen=True, eq=False)
class CausalDataset:
    """Outcomes ``y``, binary treatments ``w`` and covariates ``z`` from one source.

    Arrays are copied and made read-only on construction, and the invariants
    are checked by :func:`validate`.
    """

    y: np.ndarray
    w: np.ndarray
    z: np.ndarray = None
    source: Source = Source.EXPERIMENTAL
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        z = _as_matrix(self.z, len(y))
        if z.ndim != 2:
            raise LengthMismatch(f"z: expected a 2-d matrix, got {z.ndim} dimensions")
        names = tuple(self.covariate_names) or tuple(f"z{j}" for j in range(z.shape[1]))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "covariate_names", names)
        validate(self)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.z.shape[1]

    @property
    def treated(self) -> np.ndarray:
        """Indices of treated units."""
        return np.flatnonzero(self.w == 1)

    @property
    def controls(self) -> np.ndarray:
        return np.flatnonzero(self.w == 0)

    def subset(self, idx: Sequence[int] | np.ndarray) -> "CausalDataset":
        idx = np.asarray(idx, dtype=int)
        return CausalDataset(self.y[idx], self.w[idx], self.z[idx], self.source,
                             self.covariate_names)

    def select(self, names: Iterable[str] | None) -> "CausalDataset":
        """Keep only the named covariate columns (all of them when ``names`` is None)."""
        if names is None:
            return self
        names = list(names)
        missing = [c for c in names if c not in self.covariate_names]
        if missing:
            raise ColumnMismatch(f"z: unknown covariate column(s) {missing}")
        cols = [self.covariate_names.index(c) for c in names]
        return CausalDataset(self.y, self.w, self.z[:, cols], self.source, tuple(names))

    def with_source(self, source: Source) -> "CausalDataset":
        return CausalDataset(self.y, self.w, self.z, source, self.covariate_names)


def concat(parts: Sequence[CausalDataset], source: Source) -> CausalDataset:
    """Stack datasets row-wise; all parts must carry the same covariate columns."""
    names = parts[0].covariate_names
    for p in parts[1:]:
        if p.covariate_names != names:
            raise ColumnMismatch(
                f"z: covariate columns differ: {list(names)} vs {list(p.covariate_names)}"
            )
    return CausalDataset(
        np.concatenate([p.y for p in parts]),
        np.concatenate([p.w for p in parts]),
        np.vstack([p.z for p in parts]),
        source,
        names,
    )


def validate(dataset: CausalDataset) -> None:
    """Raise unless every :class:`CausalDataset` invariant holds."""
    y, w, z = dataset.y, dataset.w, dataset.z
    n = len(y)
    if len(w) != n:
        raise LengthMismatch(f"w: {len(w)} rows but y has {n}")
    if z.shape[0] != n:
        raise LengthMismatch(f"z: {z.shape[0]} rows but y has {n}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise NonFiniteValue(f"y: non-finite value at row {bad[0]}")
    bad = np.flatnonzero((w != 0) & (w != 1))
    if bad.size:
        raise NonBinaryTreatment(f"w: value {w[bad[0]]!r} at row {bad[0]} is not 0 or 1")
    if z.size:
        rows, cols = np.nonzero(~np.isfinite(z))
        if rows.size:
            raise NonFiniteValue(f"z: non-finite value at row {rows[0]}, column {cols[0]}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Full-model parameter vector; ``theta[causal_index]`` is the treatment effect."""

    theta: np.ndarray
    causal_index: int = CAUSAL_INDEX

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size < 1:
            raise LengthMismatch("theta: dimension must be at least 1")
        if not 0 <= self.causal_index < theta.size:
            raise LengthMismatch(
                f"theta: causal_index {self.causal_index} out of range for dimension {theta.size}"
            )
        if not np.all(np.isfinite(theta)):
            raise NonFiniteValue("theta: non-finite coordinate")
        object.__setattr__(self, "theta", _frozen(theta))

    @property
    def beta(self) -> float:
        return float(self.theta[self.causal_index])

    def __len__(self):
        return self.theta.size


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Rows ``[w_i, z_i..., 1]``; the intercept column is present only when flagged."""

    X: np.ndarray
    intercept_included: bool

    @property
    def shape(self):
        return self.X.shape

    def penalty_mask(self) -> np.ndarray:
        """1 for penalised coordinates, 0 for the intercept."""
        mask = np.ones(self.X.shape[1])
        if self.intercept_included:
            mask[-1] = 0.0
        return mask


def design_matrix(dataset: CausalDataset, with_intercept: bool = True) -> DesignMatrix:
    cols = [dataset.w[:, None], dataset.z]
    if with_intercept:
        cols.append(np.ones((dataset.n, 1)))
    return DesignMatrix(_frozen(np.hstack(cols)), with_intercept)


def attach_treated(exp: CausalDataset, obs: CausalDataset) -> CausalDataset:
    """Observational controls plus the experimental treated units.

    Control-only observational samples cannot identify a treatment
    coefficient on their own; borrowing the experimental treated arm gives
    the usual "randomised treated vs. observational controls" comparison.
    Returned unchanged when ``obs`` already contains treated units.
    """
    if obs.treated.size:
        return obs
    return concat([exp.subset(exp.treated).with_source(Source.OBSERVATIONAL), obs],
                  Source.OBSERVATIONAL)
