"""Loader for the Dehejia-Wahba subset of the NSW job-training data and its
PSID / CPS comparison groups.

The files are the public whitespace-separated tables ``nswre74_treated.txt``,
``nswre74_control.txt``, ``psid_controls.txt`` and ``cps_controls.txt`` with
columns ``treat age educ black hisp married nodegree re74 re75 re78``. They
are not shipped with the package; point ``$CVCI_LALONDE_DIR`` at a directory
holding them.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .data import CausalDataset, Source, concat
from .errors import IoError, ParseError

ENV_DIR = "CVCI_LALONDE_DIR"
RAW_COLUMNS = ("treat", "age", "educ", "black", "hisp", "married", "nodegree", "re74", "re75", "re78")
FILES = {
    "nsw_treated": "nswre74_treated.txt",
    "nsw_control": "nswre74_control.txt",
    "psid": "psid_controls.txt",
    "cps": "cps_controls.txt",
}
OUTCOME = "re78"
COVARIATES = ("age", "age2", "educ", "nodegree", "black", "hisp", "married",
              "re74", "re75", "u74", "u75")

_DEMOGRAPHICS = ("age", "age2", "educ", "nodegree", "black", "hisp")
#: covariates of the eight classic regression columns
COLUMN_SETS: dict[int, tuple[str, ...]] = {
    1: (),
    2: _DEMOGRAPHICS,
    3: ("re75",),
    4: _DEMOGRAPHICS + ("re75",),
    5: ("age", "educ", "nodegree", "black", "hisp", "married", "re75", "u75"),
    6: _DEMOGRAPHICS + ("re74",),
    7: _DEMOGRAPHICS + ("re75", "re74"),
    8: ("age", "educ", "nodegree", "black", "hisp", "married", "re75", "u75", "re74", "u74"),
}


def data_dir(path=None) -> Path | None:
    """Directory holding all four files, or None when unavailable."""
    candidates = [path] if path is not None else [os.environ.get(ENV_DIR)]
    for c in candidates:
        if c and all((Path(c) / f).is_file() for f in FILES.values()):
            return Path(c)
    return None


def read_table(path, source: Source = Source.OBSERVATIONAL) -> CausalDataset:
    """Parse one whitespace table and add ``age2``, ``u74`` and ``u75``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != len(RAW_COLUMNS):
            raise ParseError(f"{path}: row {lineno} has {len(fields)} fields, expected {len(RAW_COLUMNS)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ParseError(f"{path}: row {lineno}: non-numeric field") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    a = np.array(rows)
    col = {name: a[:, j] for j, name in enumerate(RAW_COLUMNS)}
    col["age2"] = col["age"] ** 2
    col["u74"] = (col["re74"] == 0).astype(float)
    col["u75"] = (col["re75"] == 0).astype(float)
    z = np.column_stack([col[c] for c in COVARIATES])
    return CausalDataset(col[OUTCOME], col["treat"], z, source, COVARIATES)


def load(directory=None, control: str = "psid", column: int | None = None):
    """Experimental NSW sample (both arms) and one observational control group.

    ``column`` keeps only the covariates of that classic regression column.
    """
    d = data_dir(directory)
    if d is None:
        raise IoError(f"LaLonde files not found; set ${ENV_DIR} to a directory holding "
                      + ", ".join(FILES.values()))
    if control not in ("psid", "cps"):
        raise ParseError(f"unknown control group {control!r}; expected 'psid' or 'cps'")
    nsw = concat([read_table(d / FILES["nsw_treated"], Source.EXPERIMENTAL),
                  read_table(d / FILES["nsw_control"], Source.EXPERIMENTAL)], Source.EXPERIMENTAL)
    obs = read_table(d / FILES[control], Source.OBSERVATIONAL)
    if column is not None:
        cols = COLUMN_SETS[column]
        nsw, obs = nsw.select(cols), obs.select(cols)
    return nsw, obs
