"""``cvci`` command line: estimate, simulate, bootstrap, sweep, convert-lalonde.

Failures exit with status 2 and print one line ``error: <code>: <message>``
to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import lalonde
from .baselines import DEFAULT_ALPHA, exp_only, obs_only, pool_all, ttest_then_pool
from .bench import (
    Cvci,
    ExpOnly,
    ObsOnly,
    Pool,
    Setting,
    SimScenario,
    TTest,
    bootstrap_sd,
    default_methods,
    monte_carlo,
    sweep,
    sweep_rows,
)
from .bench.rng import derived_seed
from .cv import EstimatorConfig, Mode, cvci_estimate, default_grid
from .data import Source, attach_treated
from .erm import Ridge, SquaredError
from .errors import ConfigError, CvciError
from .experimental import EstimatorKind
from .io import ResultDocument, dumps, emit, load_csv, write_csv

EXIT_FAILURE = 2
METHOD_NAMES = ("exp_only", "obs_only", "pool_all", "ttest_pool", "cvci")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise ConfigError(message.replace("\n", " "))


def _k(text: str):
    if text == "loo":
        return "loo"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"K must be an integer >= 2 or 'loo', got {text!r}")
    if k < 2:
        raise argparse.ArgumentTypeError(f"K must be an integer >= 2 or 'loo', got {text!r}")
    return k


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=[k.value for k in EstimatorKind
                                           if k not in (EstimatorKind.MEAN, EstimatorKind.CONTROL_MEAN)])
    p.add_argument("--k", type=_k, help="number of folds, or 'loo'")
    p.add_argument("--grid-size", type=_positive_int, default=50)
    p.add_argument("--loss", choices=("squared", "ridge"), default="squared")
    p.add_argument("--ridge", type=float, default=0.0, help="ridge penalty for --loss ridge")
    p.add_argument("--propensity", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="t-test level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="result document path (stdout when omitted)")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--exp", required=True, help="experimental CSV")
    p.add_argument("--obs", required=True, help="observational CSV")
    p.add_argument("--outcome", default="y")
    p.add_argument("--treatment", default="w")
    p.add_argument("--covariates", help="comma-separated covariate columns ('' for none; default all)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.TWO_ARM.value)


def _sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--setting", choices=[s.value for s in Setting], default=Setting.NO_COVARIATE.value)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n-exp", type=_positive_int, default=100)
    p.add_argument("--n-obs", type=_positive_int, default=5000)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--runs", type=_positive_int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvci", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="CVCI and the four baselines on two CSV files")
    _data_args(p)
    _common(p)
    p.add_argument("--resplits", type=_positive_int, default=1,
                   help="repeat CVCI over this many fold assignments")
    p.add_argument("--boot", type=int, default=0, help="bootstrap replicates per method (0 = none)")

    p = sub.add_parser("bootstrap", help="bootstrap standard deviation of one method")
    _data_args(p)
    _common(p)
    p.add_argument("--method", choices=METHOD_NAMES, default="cvci")
    p.add_argument("--boot", type=int, default=1000)

    p = sub.add_parser("simulate", help="Monte Carlo MSE on a synthetic scenario")
    _sim_args(p)
    _common(p)

    p = sub.add_parser("sweep", help="Monte Carlo over a range of one scenario parameter")
    _sim_args(p)
    _common(p)
    p.add_argument("--param", default="epsilon", choices=("epsilon", "n_obs", "n_exp", "sigma2", "tau_star"))
    p.add_argument("--values", type=_floats, required=True)

    p = sub.add_parser("convert-lalonde", help="write the NSW/PSID/CPS tables as CSV files")
    p.add_argument("--lalonde-dir", help=f"directory with the raw tables (default ${lalonde.ENV_DIR})")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out", help="result document path (stdout when omitted)")
    return parser


def _config(args, mode: Mode) -> EstimatorConfig:
    loss = Ridge(args.ridge) if args.loss == "ridge" else SquaredError()
    default_kind = EstimatorKind.DIFF_IN_MEANS
    if getattr(args, "setting", None) == Setting.LINEAR.value:
        default_kind = EstimatorKind.AIPW
    return EstimatorConfig(mode=mode, estimator=args.estimator or default_kind, loss=loss,
                           propensity=args.propensity)


def _fold_count(args, config, exp):
    if args.k == "loo":
        return exp.n
    return args.k


def _echo(args) -> dict:
    return {k.replace("_", "-"): v for k, v in sorted(vars(args).items()) if k != "command"}


def _load(args):
    cov = None if args.covariates is None else [c.strip() for c in args.covariates.split(",") if c.strip()]
    exp = load_csv(args.exp, args.outcome, args.treatment, cov, Source.EXPERIMENTAL)
    obs = load_csv(args.obs, args.outcome, args.treatment, list(exp.covariate_names), Source.OBSERVATIONAL)
    mode = Mode(args.mode)
    augmented = mode is Mode.TWO_ARM and obs.treated.size == 0
    cv_obs = attach_treated(exp, obs) if augmented else obs
    return exp, obs, cv_obs, mode, augmented


def _panel(config: EstimatorConfig, args, exp):
    mode = config.mode
    grid = tuple(default_grid(args.grid_size))
    return {
        "exp_only": ExpOnly(config),
        "obs_only": ObsOnly(mode),
        "pool_all": Pool(mode),
        "ttest_pool": TTest(mode if mode is not Mode.TWO_ARM else Mode.CONTROL_ARM_ONLY, args.alpha),
        "cvci": Cvci(config, _fold_count(args, config, exp), grid),
    }


def _cmd_estimate(args) -> dict:
    exp, obs, cv_obs, mode, augmented = _load(args)
    config = _config(args, mode)
    grid = default_grid(args.grid_size)
    K = _fold_count(args, config, exp)
    fits = []
    for r in range(args.resplits):
        seed = args.seed if r == 0 else derived_seed(args.seed, r)
        fits.append(cvci_estimate(exp, cv_obs, K, grid, config, seed))
    first = fits[0]
    lams = np.array([f.lambda_hat for f in fits])
    ates = np.array([f.ate for f in fits])
    exp_treated = None if mode is Mode.MEAN else exp.subset(exp.treated)
    if mode is Mode.TWO_ARM and obs.treated.size:
        exp_treated = None
    tt_mode = Mode.CONTROL_ARM_ONLY if mode is Mode.TWO_ARM else mode
    baselines = [
        exp_only(exp, config, args.seed),
        obs_only(exp_treated, obs, mode),
        pool_all(exp, obs, mode),
        ttest_then_pool(exp, obs, args.alpha, tt_mode),
    ]
    estimates = {b.kind.value: {"beta": b.beta, "lambda": b.lambda_equivalent, "detail": b.detail}
                 for b in baselines}
    estimates["cvci"] = {"beta": first.ate, "lambda": first.lambda_hat,
                         "detail": {"tau_exp": first.tau_exp.tau_hat, "K": first.fold_plan.K,
                                    "theta": first.final_fit.theta.theta}}
    results = {
        "n_exp": exp.n,
        "n_obs": obs.n,
        "covariates": list(exp.covariate_names),
        "observational_augmented": augmented,
        "estimates": estimates,
        "cv_trace": {"grid": first.grid, "values": first.cv_values},
        "lambda_stats": {"n": len(fits), "mean": float(lams.mean()),
                         "sd": float(lams.std(ddof=1)) if len(fits) > 1 else 0.0,
                         "ate_mean": float(ates.mean()),
                         "ate_sd": float(ates.std(ddof=1)) if len(fits) > 1 else 0.0},
    }
    if args.boot:
        results["bootstrap_sd"] = {
            name: bootstrap_sd(exp, cv_obs if name == "cvci" else obs, m, args.boot, args.seed)
            for name, m in _panel(config, args, exp).items()
        }
    return results


def _cmd_bootstrap(args) -> dict:
    exp, obs, cv_obs, mode, augmented = _load(args)
    config = _config(args, mode)
    method = _panel(config, args, exp)[args.method]
    data_obs = cv_obs if args.method == "cvci" else obs
    point = method(exp, data_obs, args.seed)
    sd = bootstrap_sd(exp, data_obs, method, args.boot, args.seed)
    return {"method": args.method, "estimate": point.estimate, "lambda": point.lambda_hat,
            "bootstrap_sd": sd, "n_boot": args.boot, "observational_augmented": augmented}


def _scenario(args) -> SimScenario:
    return SimScenario(setting=args.setting, tau_star=args.tau, epsilon=args.epsilon,
                       sigma2=args.sigma2, n_exp=args.n_exp, n_obs=args.n_obs, d=args.d)


def _sim_methods(args):
    mode = Mode.MEAN if args.setting == Setting.NO_COVARIATE.value else Mode.TWO_ARM
    config = _config(args, mode)
    methods = default_methods(mode, config)
    K = None if args.k is None else (args.n_exp if args.k == "loo" else args.k)
    grid = tuple(default_grid(args.grid_size))
    return [Cvci(config, K, grid) if m.name == "cvci" else
            (TTest(mode, args.alpha) if m.name == "ttest_pool" else m) for m in methods]


def _stats(report) -> dict:
    return {name: vars(st) for name, st in report.stats.items()}


def _cmd_simulate(args) -> dict:
    report = monte_carlo(_scenario(args), _sim_methods(args), args.runs, args.seed, keep_records=True)
    return {
        "n_runs": report.n_runs,
        "truth": report.truth,
        "stats": _stats(report),
        "records": [vars(r) for r in report.records],
    }


def _cmd_sweep(args) -> dict:
    points = sweep(_scenario(args), args.param, args.values, _sim_methods(args), args.runs, args.seed)
    args._rows = sweep_rows(points)
    return {
        "param": args.param,
        "points": [{"id": p.point_id, "value": p.value, "n_runs": p.report.n_runs,
                    "stats": _stats(p.report)} for p in points],
    }


def _cmd_convert(args) -> dict:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, control in (("nsw", None), ("psid", "psid"), ("cps", "cps")):
        nsw, obs = lalonde.load(args.lalonde_dir, control or "psid")
        data = nsw if control is None else obs
        path = out / f"{name}.csv"
        write_csv(path, data, lalonde.OUTCOME, "treat")
        written[name] = {"path": str(path), "rows": data.n}
    return {"files": written}


COMMANDS = {
    "estimate": _cmd_estimate,
    "bootstrap": _cmd_bootstrap,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "convert-lalonde": _cmd_convert,
}


def run(argv) -> tuple[ResultDocument, list | None]:
    """Parse ``argv`` and execute; returns the document and any sweep rows."""
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    results = COMMANDS[args.command](args)
    rows = getattr(args, "_rows", None)
    if rows is not None:
        del args._rows
    doc = ResultDocument(args.command, _echo(args), getattr(args, "seed", 0), results,
                         time.perf_counter() - start)
    return doc, rows


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        doc, rows = run(argv)
        out = getattr(doc, "config", {}).get("out")
        if out:
            emit(doc, out, rows)
        else:
            sys.stdout.write(dumps(doc.to_dict()))
    except CvciError as exc:
        print(f"error: {exc.code}: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: io_error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
