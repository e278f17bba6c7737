"""CSV ingestion and the versioned, deterministic result document."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .data import CausalDataset, Source
from .errors import IoError, NonBinaryTreatment, ParseError

SCHEMA_VERSION = "cvci.result/1"
WALL_CLOCK_KEY = "wall_clock_seconds"


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return v


def _parse_treatment(text: str, row: int, col: str) -> float:
    t = text.strip()
    if t in ("0", "1"):
        return float(t)
    raise NonBinaryTreatment(f"row {row}, column {col!r}: treatment {text!r} is not 0 or 1")


def load_csv(path, outcome: str = "y", treatment: str = "w",
             covariates: Sequence[str] | None = None,
             source: Source = Source.EXPERIMENTAL) -> CausalDataset:
    """Read one unit per row from a CSV file with a header.

    ``covariates=None`` takes every column other than the outcome and the
    treatment. Row numbers in errors count the header as row 1.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file, header row expected")
        header = [h.strip() for h in header]
        if covariates is None:
            covariates = [h for h in header if h not in (outcome, treatment)]
        covariates = list(covariates)
        for col in [outcome, treatment, *covariates]:
            if col not in header:
                raise ParseError(f"{path}: missing column {col!r}")
        iy, iw = header.index(outcome), header.index(treatment)
        iz = [header.index(c) for c in covariates]
        ys, ws, zs = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"row {lineno}: {len(rec)} fields, header has {len(header)}")
            ys.append(_parse_float(rec[iy], lineno, outcome))
            ws.append(_parse_treatment(rec[iw], lineno, treatment))
            zs.append([_parse_float(rec[j], lineno, c) for j, c in zip(iz, covariates)])
    if not ys:
        raise ParseError(f"{path}: no data rows")
    return CausalDataset(np.array(ys), np.array(ws), np.array(zs).reshape(len(ys), len(iz)),
                         source, tuple(covariates))


def write_csv(path, data: CausalDataset, outcome: str = "y", treatment: str = "w") -> None:
    try:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow([outcome, treatment, *data.covariate_names])
            for i in range(data.n):
                out.writerow([_fmt_float(data.y[i]), int(data.w[i]),
                              *(_fmt_float(v) for v in data.z[i])])
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


@dataclass(eq=False)
class ResultDocument:
    """Everything a command produced, plus the configuration that produced it."""

    command: str
    config: dict
    seed: int
    results: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    schema: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "results": self.results,
            WALL_CLOCK_KEY: self.wall_clock_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultDocument":
        if d.get("schema") != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema {d.get('schema')!r}, expected {SCHEMA_VERSION!r}")
        return cls(d["command"], d["config"], d["seed"], d.get("results", {}),
                   d.get(WALL_CLOCK_KEY, 0.0), d["schema"])

    def canonical(self, include_wall_clock: bool = False) -> str:
        d = self.to_dict()
        if not include_wall_clock:
            d.pop(WALL_CLOCK_KEY)
        return dumps(d)

    def __eq__(self, other):
        if not isinstance(other, ResultDocument):
            return NotImplemented
        return self.canonical(True) == other.canonical(True)


def _fmt_float(x: float) -> str:
    s = format(float(x), ".17g")
    if all(c.isdigit() or c == "-" for c in s):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, list)):
        return list(obj)
    return obj


def _dump(obj: Any, indent: int, out: list) -> None:
    obj = _plain(obj)
    pad = "  " * (indent + 1)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, key in enumerate(sorted(obj, key=str)):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _dump(obj[key], indent + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append("  " * indent + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad)
            _dump(item, indent + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append("  " * indent + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """JSON with sorted keys, two-space indent and 17-significant-digit floats; NaN becomes null."""
    out: list[str] = []
    _dump(obj, 0, out)
    out.append("\n")
    return "".join(out)


def emit(doc: ResultDocument, path, sweep_rows: Sequence[tuple] | None = None) -> None:
    """Write the document; with ``sweep_rows`` also write a long-format CSV next to it."""
    path = Path(path)
    try:
        path.write_text(dumps(doc.to_dict()))
        if sweep_rows is not None:
            write_sweep_csv(path.with_suffix(".csv"), sweep_rows)
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


def read_document(path) -> ResultDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return ResultDocument.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


SWEEP_HEADER = ("scenario_id", "method", "metric", "value")


def write_sweep_csv(path, rows: Sequence[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SWEEP_HEADER)
        for sid, method, metric, value in rows:
            out.writerow([sid, method, metric, _fmt_float(value)])
