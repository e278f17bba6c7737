import contextlib
import os

import numpy as np
import pytest
from hypothesis import settings

from cvci import lalonde
from cvci.data import CausalDataset, Source

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[tuple[int, str], tuple[str, str, str]] = {}


@contextlib.contextmanager
def criterion(number: int, title: str, part: str = ""):
    """Record PASS/FAIL/SKIP for one acceptance criterion; the exception still propagates."""
    detail = {"text": ""}
    try:
        yield detail
    except pytest.skip.Exception as exc:
        _ACCEPTANCE[(number, part)] = ("SKIP", title, str(exc.msg if hasattr(exc, "msg") else exc))
        raise
    except BaseException as exc:
        _ACCEPTANCE[(number, part)] = ("FAIL", title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    else:
        _ACCEPTANCE[(number, part)] = ("PASS", title, detail["text"])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, part in sorted(_ACCEPTANCE):
        status, title, text = _ACCEPTANCE[(n, part)]
        label = f"{n}{part}"
        line = f"criterion {label:>2} {status}: {title}"
        if text:
            line += f" [{text}]"
        terminalreporter.write_line(line)


@pytest.fixture
def lalonde_dir():
    d = lalonde.data_dir()
    if d is None:
        pytest.skip(f"LaLonde data not available (set ${lalonde.ENV_DIR})")
    return d


def make_linear(rng, n_exp=60, n_obs=300, d=3, tau=1.0, eps=0.0, p_obs=0.3):
    theta = rng.normal(size=d)
    z = rng.normal(size=(n_exp, d))
    w = np.zeros(n_exp)
    w[rng.permutation(n_exp)[: n_exp // 2]] = 1
    exp = CausalDataset(z @ theta + tau * w + rng.normal(size=n_exp), w, z)
    zo = rng.normal(size=(n_obs, d))
    wo = (rng.random(n_obs) < p_obs).astype(float)
    wo[:2] = [0, 1]
    obs = CausalDataset(zo @ theta + (tau + eps) * wo + rng.normal(size=n_obs), wo, zo,
                        Source.OBSERVATIONAL)
    return exp, obs


@pytest.fixture
def linear_pair():
    return make_linear(np.random.default_rng(20))
