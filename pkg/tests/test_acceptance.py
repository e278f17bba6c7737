"""Acceptance checks; each test reports one PASS/FAIL/SKIP line in the terminal summary."""

import math
import time

import numpy as np
import pytest

from cvci import lalonde
from cvci.baselines import exp_only, obs_only, pool_all, ttest_then_pool, welch_test
from cvci.bench import Cvci, ExpOnly, SimScenario, bootstrap_sd, monte_carlo
from cvci.cli import main
from cvci.cv import EstimatorConfig, Mode, _Problem, cvci_estimate, default_grid
from cvci.data import CausalDataset, Source, attach_treated, design_matrix
from cvci.erm import fit_generic, fit_linear, fit_no_covariate, weighted_objective
from cvci.experimental import diff_in_means, estimate
from cvci.io import WALL_CLOCK_KEY, write_csv

from conftest import criterion


def _random_linear(rng, n_exp, n_obs, d):
    z = rng.normal(size=(n_exp, d))
    w = (rng.random(n_exp) < 0.5).astype(float)
    w[:2], w[2:4] = 1, 0
    theta = rng.normal(size=d)
    exp = CausalDataset(z @ theta + 0.8 * w + rng.normal(size=n_exp), w, z)
    zo = rng.normal(size=(n_obs, d))
    wo = (rng.random(n_obs) < 0.3).astype(float)
    wo[:2], wo[2:4] = 1, 0
    obs = CausalDataset(zo @ theta + 1.3 * wo + rng.normal(size=n_obs), wo, zo, Source.OBSERVATIONAL)
    return exp, obs


def test_c01_endpoint_identities():
    with criterion(1, "endpoint identities on 200 random linear instances") as c:
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(200):
            exp, obs = _random_linear(rng, rng.integers(20, 101), rng.integers(20, 501), rng.integers(0, 9))
            tau = diff_in_means(exp).tau_hat
            assert fit_linear(0.0, tau, obs).beta == tau
            assert cvci_estimate(exp, obs, grid=[0.0]).beta == tau
            X = np.column_stack([obs.w, obs.z, np.ones(obs.n)])
            ref = np.linalg.lstsq(X, obs.y, rcond=None)[0][0]
            err = abs(fit_linear(1.0, tau, obs).beta - ref) / max(1.0, abs(ref))
            worst = max(worst, err)
            assert err <= 1e-10
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        c["text"] = f"max lambda=1 gap {worst:.1e}, {elapsed:.2f}s"


def _gradient_descent(H, b, tol=1e-13, max_iter=2_000_000):
    """Plain gradient descent on 0.5 theta'H theta - b'theta, batched over the first axis."""
    L = np.linalg.eigvalsh(H)[:, -1]
    step = (1.0 / L)[:, None]
    theta = np.zeros(b.shape)
    for _ in range(max_iter):
        g = np.einsum("gij,gj->gi", H, theta) - b
        if np.max(np.abs(g)) < tol:
            break
        theta -= step * g
    return theta


def test_c02_closed_form_matches_gradient_descent():
    with criterion(2, "closed form vs gradient-descent minimiser, 50 instances x 3 weights") as c:
        rng = np.random.default_rng(202)
        start = time.perf_counter()
        Hs, bs, cases = [], [], []
        for _ in range(50):
            z = rng.normal(size=(10, 1))
            w = np.array([1.0] * 5 + [0.0] * 5)[rng.permutation(10)]
            obs = CausalDataset(2 * z[:, 0] + w + rng.normal(size=10), w, z, Source.OBSERVATIONAL)
            tau = rng.normal()
            X = design_matrix(obs).X
            assert X.shape == (10, 3)
            for lam in (0.1, 0.5, 0.9):
                # objective (1-lam)(theta_0 - tau)^2 + lam/n |y - X theta|^2, as a quadratic
                H = 2 * lam * X.T @ X / 10
                H[0, 0] += 2 * (1 - lam)
                b = 2 * lam * X.T @ obs.y / 10
                b[0] += 2 * (1 - lam) * tau
                Hs.append(H)
                bs.append(b)
                cases.append((lam, tau, obs))
        theta = _gradient_descent(np.array(Hs), np.array(bs))
        gaps = [abs(fit_linear(lam, tau, obs).beta - th[0]) for (lam, tau, obs), th in zip(cases, theta)]
        elapsed = time.perf_counter() - start
        assert max(gaps) <= 1e-6
        assert elapsed < 60.0, f"took {elapsed:.2f}s"
        c["text"] = f"max beta gap {max(gaps):.1e}, {elapsed:.2f}s"


def test_c03_additive_loss_lemma():
    with criterion(3, "aggregate and unit-level experimental losses share minimisers") as c:
        rng = np.random.default_rng(303)
        start = time.perf_counter()
        worst = 0.0
        kinds = ("diff_in_means", "plug_in", "aipw")
        for i in range(20):
            exp, obs = _random_linear(rng, 60, 200, 3)
            est = estimate(exp, kinds[i % 3], seed=i)
            phi, lam = est.phi, float(rng.uniform(0.05, 0.95))
            X = design_matrix(obs).X
            p = X.shape[1]
            # unit-level objective as one stacked least-squares problem
            e1 = np.zeros(p)
            e1[0] = 1.0
            a = math.sqrt((1 - lam) / phi.size)
            bw = math.sqrt(lam / obs.n)
            A = np.vstack([np.tile(a * e1, (phi.size, 1)), bw * X])
            rhs = np.concatenate([a * phi, bw * obs.y])
            unit = np.linalg.lstsq(A, rhs, rcond=None)[0]
            agg = fit_linear(lam, est.tau_hat, obs).theta.theta
            gap = np.max(np.abs(unit - agg)) / max(1.0, np.max(np.abs(agg)))
            worst = max(worst, gap)
            assert gap <= 1e-10
            # the two objectives differ by a constant
            diffs = []
            for _ in range(3):
                th = rng.normal(size=p)
                unit_obj = (1 - lam) * np.mean((th[0] - phi) ** 2) + lam * np.mean((obs.y - X @ th) ** 2)
                diffs.append(unit_obj - weighted_objective(lam, th, est.tau_hat, obs))
            assert np.ptp(diffs) <= 1e-9 * max(1.0, abs(diffs[0]))
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0
        c["text"] = f"max minimiser gap {worst:.1e}"


def test_c04_no_covariate_convexity():
    with criterion(4, "no-covariate fit is the convex combination of the two means") as c:
        rng = np.random.default_rng(404)
        grid = default_grid(50)
        worst = 0.0
        for _ in range(20):
            exp = CausalDataset(rng.normal(0.5, 1, 30), np.ones(30))
            obs = CausalDataset(rng.normal(1.5, 1, 300), np.ones(300), source=Source.OBSERVATIONAL)
            a, b = exp.y.mean(), obs.y.mean()
            closed = np.array([fit_no_covariate(lam, a, b).beta for lam in grid])
            problem = _Problem(exp, obs, EstimatorConfig(mode=Mode.MEAN))
            batched = problem.betas(grid, a)
            newton = np.array([fit_generic(lam, a, obs, with_intercept=False).beta for lam in grid])
            for path in (closed, batched, newton):
                target = (1 - grid) * a + grid * b
                affine = (1 - grid) * path[0] + grid * path[-1]
                worst = max(worst, np.max(np.abs(path - target)), np.max(np.abs(path - affine)))
        assert worst < 1e-14
        c["text"] = f"max affinity residual {worst:.1e}"


def _lalonde_or_skip():
    d = lalonde.data_dir()
    if d is None:
        pytest.skip(f"LaLonde files not available (set ${lalonde.ENV_DIR})")
    return d


def test_c05_lalonde_deterministic_rows():
    with criterion(5, "LaLonde single-source and pooled OLS rows to +-1 dollar") as c:
        d = _lalonde_or_skip()
        start = time.perf_counter()
        nsw1, psid1 = lalonde.load(d, "psid", column=1)
        _, cps1 = lalonde.load(d, "cps", column=1)
        nsw8, psid8 = lalonde.load(d, "psid", column=8)
        _, cps8 = lalonde.load(d, "cps", column=8)
        t1, t8 = nsw1.subset(nsw1.treated), nsw8.subset(nsw8.treated)
        got = {
            "exp-only col1": (exp_only(nsw1).beta, 1794),
            "obs-only PSID col1": (obs_only(t1, psid1).beta, -15205),
            "obs-only CPS col1": (obs_only(t1, cps1).beta, -8498),
            "pool PSID col1": (pool_all(nsw1, psid1).beta, -13598),
            "obs-only PSID col8": (obs_only(t8, psid8).beta, 4),
            "obs-only CPS col8": (obs_only(t8, cps8).beta, 1066),
        }
        off = {k: v for k, v in got.items() if abs(v[0] - v[1]) > 1.0}
        assert not off, off
        assert time.perf_counter() - start < 5.0
        c["text"] = ", ".join(f"{k}={v[0]:.1f}" for k, v in got.items())


def test_c06_lalonde_lambda_trends():
    with criterion(6, "LaLonde mean selected weight over 500 five-fold re-splits") as c:
        d = _lalonde_or_skip()
        start = time.perf_counter()
        nsw1, psid1 = lalonde.load(d, "psid", column=1)
        nsw8, psid8 = lalonde.load(d, "psid", column=8)
        obs1, obs8 = attach_treated(nsw1, psid1), attach_treated(nsw8, psid8)
        cfg1 = EstimatorConfig(estimator="diff_in_means")
        cfg8 = EstimatorConfig(estimator="plug_in")
        lam1 = np.mean([cvci_estimate(nsw1, obs1, 5, None, cfg1, s).lambda_hat for s in range(500)])
        lam8 = np.mean([cvci_estimate(nsw8, obs8, 5, None, cfg8, s).lambda_hat for s in range(500)])
        c["text"] = f"column 1 {lam1:.3f}, column 8 {lam8:.3f}"
        assert lam1 <= 0.05
        assert 0.6 <= lam8 <= 0.95
        assert time.perf_counter() - start < 120.0


def test_c07_simulation_adaptivity():
    with criterion(7, "no-covariate Monte Carlo, 2000 runs") as c:
        start = time.perf_counter()
        cfg = EstimatorConfig(mode=Mode.MEAN)
        methods = [ExpOnly(cfg), Cvci(cfg)]
        base = SimScenario(n_exp=100, n_obs=5000, sigma2=1.0)
        r0 = monte_carlo(base.with_(epsilon=0.0), methods, 2000, 7)
        r2 = monte_carlo(base.with_(epsilon=2.0), methods, 2000, 7)
        elapsed = time.perf_counter() - start
        c["text"] = (f"eps=0: cvci {r0['cvci'].mse:.5f} vs exp {r0['exp_only'].mse:.5f}; "
                     f"eps=2: cvci {r2['cvci'].mse:.5f} vs exp {r2['exp_only'].mse:.5f}; {elapsed:.1f}s")
        assert r0["cvci"].mse < r0["exp_only"].mse
        assert r2["cvci"].mse <= 1.3 * r2["exp_only"].mse
        assert abs(r0["exp_only"].mse - 0.01) <= 0.2 * 0.01
        assert elapsed < 180.0


def test_c08a_bootstrap_synthetic():
    with criterion(8, "bootstrap sd vs analytic standard error (synthetic)", "a") as c:
        start = time.perf_counter()
        rng = np.random.default_rng(808)
        y = np.r_[rng.normal(1.0, 2.0, 200), rng.normal(0.0, 1.0, 200)]
        exp = CausalDataset(y, [1] * 200 + [0] * 200)
        se = math.sqrt(y[:200].var(ddof=1) / 200 + y[200:].var(ddof=1) / 200)
        sd = bootstrap_sd(exp, None, ExpOnly(), 1000, 5)
        c["text"] = f"bootstrap {sd:.4f} vs analytic {se:.4f}"
        assert abs(sd - se) <= 0.15 * se
        assert time.perf_counter() - start < 60.0


def test_c08b_bootstrap_lalonde():
    with criterion(8, "bootstrap sd of the experimental estimate, LaLonde column 1", "b") as c:
        d = _lalonde_or_skip()
        nsw, _ = lalonde.load(d, "psid", column=1)
        sd = bootstrap_sd(nsw, None, ExpOnly(), 1000, 5)
        c["text"] = f"bootstrap {sd:.1f} vs 658"
        assert abs(sd - 658) <= 0.1 * 658


def _fake_dw_tables(directory, rng):
    """Random tables in the whitespace layout, only to exercise the conversion command."""
    sizes = {"nsw_treated": (1, 20), "nsw_control": (0, 25), "psid": (0, 40), "cps": (0, 60)}
    for key, (treat, n) in sizes.items():
        rows = []
        for _ in range(n):
            re74, re75 = rng.choice([0.0, rng.uniform(0, 9000)], 2)
            rows.append(f"{treat} {rng.integers(17, 55)} {rng.integers(3, 17)} {rng.integers(0, 2)} "
                        f"{rng.integers(0, 2)} {rng.integers(0, 2)} {rng.integers(0, 2)} "
                        f"{re74:.4f} {re75:.4f} {rng.uniform(0, 20000):.4f}")
        (directory / lalonde.FILES[key]).write_text("\n".join(rows) + "\n")


def _strip_clock(text: str) -> str:
    return "\n".join(l for l in text.splitlines() if f'"{WALL_CLOCK_KEY}"' not in l)


def test_c09_determinism_across_threads(tmp_path, monkeypatch):
    with criterion(9, "byte-identical documents at 1, 2 and 8 threads") as c:
        exp, obs = _random_linear(np.random.default_rng(909), 60, 300, 3)
        e, o = tmp_path / "exp.csv", tmp_path / "obs.csv"
        write_csv(e, exp)
        write_csv(o, obs)
        raw = tmp_path / "raw"
        raw.mkdir()
        _fake_dw_tables(raw, np.random.default_rng(9))
        out = tmp_path / "doc.json"
        commands = {
            "estimate": ["estimate", "--exp", str(e), "--obs", str(o), "--estimator", "aipw",
                         "--resplits", "3", "--boot", "8", "--seed", "3"],
            "bootstrap": ["bootstrap", "--exp", str(e), "--obs", str(o), "--boot", "25", "--seed", "4"],
            "simulate": ["simulate", "--setting", "linear", "--n-obs", "200", "--runs", "20", "--seed", "5"],
            "sweep": ["sweep", "--values", "0,1,3", "--n-obs", "300", "--runs", "20", "--seed", "6"],
            "convert-lalonde": ["convert-lalonde", "--lalonde-dir", str(raw),
                                "--out-dir", str(tmp_path / "conv")],
        }
        for name, argv in commands.items():
            outputs = []
            for threads in ("1", "2", "8"):
                monkeypatch.setenv("CVCI_THREADS", threads)
                assert main([*argv, "--out", str(out)]) == 0, name
                text = _strip_clock(out.read_text())
                if name == "sweep":
                    text += out.with_suffix(".csv").read_text()
                if name == "convert-lalonde":
                    text += "".join((tmp_path / "conv" / f"{k}.csv").read_text() for k in ("nsw", "psid", "cps"))
                outputs.append(text)
            assert outputs[0] == outputs[1] == outputs[2], name
        c["text"] = ", ".join(commands)


def _betacf(a, b, x):
    """Continued fraction for the regularised incomplete beta function (modified Lentz)."""
    tiny, eps = 1e-300, 1e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _betainc(a, b, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                     + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _welch_oracle(x, y):
    nx, ny = len(x), len(y)
    mx, my = sum(x) / nx, sum(y) / ny
    vx = sum((v - mx) ** 2 for v in x) / (nx - 1)
    vy = sum((v - my) ** 2 for v in y) / (ny - 1)
    sx, sy = vx / nx, vy / ny
    t = (mx - my) / math.sqrt(sx + sy)
    df = (sx + sy) ** 2 / (sx ** 2 / (nx - 1) + sy ** 2 / (ny - 1))
    p = _betainc(df / 2.0, 0.5, df / (df + t * t))
    return t, p


def test_c10_ttest_gate():
    with criterion(10, "t-test gate: alpha=1 pools, alpha=0 never does, Welch decision vs oracle") as c:
        rng = np.random.default_rng(1010)
        agree, max_rel = 0, 0.0
        for i in range(100):
            nx, ny = int(rng.integers(5, 60)), int(rng.integers(5, 200))
            shift = rng.uniform(0, 0.8)
            exp = CausalDataset(rng.normal(0, rng.uniform(0.5, 2), nx), np.ones(nx))
            obs = CausalDataset(rng.normal(shift, rng.uniform(0.5, 2), ny), np.ones(ny),
                                source=Source.OBSERVATIONAL)
            pooled = ny / (nx + ny)
            assert ttest_then_pool(exp, obs, 1.0).lambda_equivalent == pooled
            assert ttest_then_pool(exp, obs, 0.0).lambda_equivalent == 0.0
            t_ref, p_ref = _welch_oracle(list(exp.y), list(obs.y))
            t, p = welch_test(exp.y, obs.y)
            assert t == pytest.approx(t_ref, rel=1e-10)
            max_rel = max(max_rel, abs(p - p_ref) / p_ref)
            decision = ttest_then_pool(exp, obs, 0.05).detail["reject"]
            assert decision == (p_ref <= 0.05)
            agree += 1
        assert max_rel < 1e-8
        c["text"] = f"{agree}/100 decisions agree, max p-value rel. gap {max_rel:.1e}"
