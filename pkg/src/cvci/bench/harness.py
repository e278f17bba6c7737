"""Monte Carlo MSE harness, bootstrap standard deviations and parameter sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .._parallel import ordered_map
from ..data import CausalDataset
from ..errors import ConfigError, CvciError, ReplicateFailure
from .methods import MethodOutput
from .rng import derived_seed, stream
from .scenarios import SimScenario, generate

MAX_RETRIES = 10


@dataclass(frozen=True)
class MethodStats:
    mse: float
    bias: float
    sd: float
    rmse: float
    mean_lambda_hat: float | None
    sd_lambda_hat: float | None


@dataclass(frozen=True)
class RunRecord:
    run: int
    method: str
    estimate: float
    lambda_hat: float | None


@dataclass(frozen=True, eq=False)
class McReport:
    n_runs: int
    truth: float
    stats: dict[str, MethodStats]
    records: tuple[RunRecord, ...] = ()

    def __getitem__(self, method: str) -> MethodStats:
        return self.stats[method]


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def summarize(estimates: np.ndarray, truth: float, lambdas: np.ndarray) -> MethodStats:
    """Error statistics of one method's estimates; ``sd`` uses ``ddof=1``."""
    err = estimates - truth
    mse = float(np.mean(err ** 2))
    lam = lambdas[~np.isnan(lambdas)]
    return MethodStats(
        mse=mse,
        bias=float(np.mean(err)),
        sd=_sd(estimates),
        rmse=math.sqrt(mse),
        mean_lambda_hat=float(np.mean(lam)) if lam.size else None,
        sd_lambda_hat=_sd(lam) if lam.size else None,
    )


def _lam(out: MethodOutput) -> float:
    return np.nan if out.lambda_hat is None else float(out.lambda_hat)


def monte_carlo(scenario: SimScenario, methods: Sequence, n_runs: int, master_seed: int = 0,
                generator: Callable | None = None, truth: float | None = None,
                keep_records: bool = False, workers: int | None = None) -> McReport:
    """Run every method on ``n_runs`` independently generated datasets.

    Run ``r`` draws its data from stream ``(master_seed, r, 0)`` and hands the
    methods the integer seed derived from ``(master_seed, r, 1)``.
    ``generator(scenario, rng)`` overrides the scenario's own generator.
    """
    if n_runs < 1:
        raise ConfigError(f"n_runs must be at least 1, got {n_runs}")
    if not methods:
        raise ConfigError("no methods given")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError(f"method names must be unique, got {names}")
    gen = generate if generator is None else generator
    truth = scenario.tau_star if truth is None else float(truth)

    def one(r: int):
        try:
            exp, obs = gen(scenario, stream(master_seed, r, 0))
            seed = derived_seed(master_seed, r, 1)
            return [m(exp, obs, seed) for m in methods]
        except CvciError as exc:
            raise ReplicateFailure(
                f"run {r} (master_seed={master_seed}) failed: {exc.code}: {exc}", r, master_seed
            ) from exc

    outs = ordered_map(one, range(n_runs), workers)
    est = np.array([[o.estimate for o in row] for row in outs], dtype=float)
    lam = np.array([[_lam(o) for o in row] for row in outs], dtype=float)
    stats = {n: summarize(est[:, j], truth, lam[:, j]) for j, n in enumerate(names)}
    records = ()
    if keep_records:
        records = tuple(
            RunRecord(r, n, float(est[r, j]), None if np.isnan(lam[r, j]) else float(lam[r, j]))
            for r in range(n_runs) for j, n in enumerate(names)
        )
    return McReport(n_runs, truth, stats, records)


def _resample(data: CausalDataset | None, rng) -> CausalDataset | None:
    if data is None:
        return None
    return data.subset(rng.integers(0, data.n, data.n))


def bootstrap(exp: CausalDataset, obs: CausalDataset | None, method, n_boot: int, seed: int = 0,
              workers: int | None = None) -> np.ndarray:
    """Estimates of ``method`` on ``n_boot`` within-source resamples.

    A replicate whose estimator fails is redrawn from a fresh stream, at most
    ``MAX_RETRIES`` times.
    """
    if n_boot < 2:
        raise ConfigError(f"n_boot must be at least 2, got {n_boot}")

    def one(b: int) -> float:
        last = None
        for attempt in range(MAX_RETRIES + 1):
            rng = stream(seed, b, attempt)
            e, o = _resample(exp, rng), _resample(obs, rng)
            try:
                return float(method(e, o, derived_seed(seed, b, attempt, 1)).estimate)
            except CvciError as exc:
                last = exc
        raise ReplicateFailure(
            f"bootstrap replicate {b} (seed={seed}) failed {MAX_RETRIES + 1} times: "
            f"{last.code}: {last}", b, seed
        ) from last

    return np.array(ordered_map(one, range(n_boot), workers))


def bootstrap_sd(exp: CausalDataset, obs: CausalDataset | None, method, n_boot: int,
                 seed: int = 0, workers: int | None = None) -> float:
    """Standard deviation (``ddof=1``) of the bootstrap estimates."""
    return float(np.std(bootstrap(exp, obs, method, n_boot, seed, workers), ddof=1))


@dataclass(frozen=True, eq=False)
class SweepPoint:
    point_id: str
    param: str
    value: float
    report: McReport


def sweep(scenario: SimScenario, param: str, values: Sequence, methods: Sequence, n_runs: int,
          master_seed: int = 0, workers: int | None = None) -> list[SweepPoint]:
    """``monte_carlo`` at each value of one scenario field, with common random numbers."""
    if not hasattr(scenario, param) or param in ("setting", "seed"):
        raise ConfigError(f"cannot sweep scenario field {param!r}")
    points = []
    for i, v in enumerate(values):
        sc = scenario.with_(**{param: type(getattr(scenario, param))(v)})
        rep = monte_carlo(sc, methods, n_runs, master_seed, workers=workers)
        points.append(SweepPoint(f"{param}={v:g}#{i}", param, float(v), rep))
    return points



METRICS = ("mse", "bias", "sd", "rmse", "mean_lambda_hat", "sd_lambda_hat")


def sweep_rows(points: Sequence[SweepPoint]) -> list[tuple]:
    """Long format: one row per (scenario point, method, statistic)."""
    rows = []
    for p in points:
        for name, st in p.report.stats.items():
            for metric in METRICS:
                v = getattr(st, metric)
                if v is not None:
                    rows.append((p.point_id, name, metric, v))
    return rows
