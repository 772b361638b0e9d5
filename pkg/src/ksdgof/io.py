"""Sample and model-spec file formats."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError
from .models import as_model, spec_from_dict


@dataclass(frozen=True, eq=False)
class SampleSet:
    data: np.ndarray
    column_names: Optional[list] = None

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


def _parse_number(text, line, col):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"column {col}: non-numeric value {text.strip()!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"column {col}: non-finite value {text.strip()!r}", line)
    return v


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(text):
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines())) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty sample file", 1)
    names = None
    if not _is_number(rows[0][1][0]):
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise ParseError("header without data rows", 2)
    width = len(names) if names is not None else len(rows[0][1])
    data = []
    for line, r in rows:
        if len(r) != width:
            raise ParseError(f"expected {width} fields, found {len(r)}", line)
        data.append([_parse_number(c, line, j + 1) for j, c in enumerate(r)])
    return SampleSet(np.array(data, dtype=float), names)


def parse_ndjson(text):
    names = None
    data = []
    width = None
    for i, raw in enumerate(text.splitlines()):
        line = i + 1
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line) from None
        if isinstance(obj, dict):
            if names is None and not data:
                names = list(obj)
            if names is None or list(obj) != names:
                raise ParseError(f"record keys {list(obj)} differ from {names}", line)
            values = [obj[k] for k in names]
        elif isinstance(obj, list):
            if names is not None:
                raise ParseError("mixed object and array records", line)
            values = obj
        elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
            values = [obj]
        else:
            raise ParseError("each record must be an array, an object or a number", line)
        if width is None:
            width = len(values)
        if len(values) != width or width == 0:
            raise ParseError(f"expected {width} fields, found {len(values)}", line)
        row = []
        for j, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParseError(f"column {j + 1}: expected a finite number, got {v!r}", line)
            row.append(float(v))
        data.append(row)
    if not data:
        raise ParseError("empty sample file", 1)
    return SampleSet(np.array(data, dtype=float), names)


def load_sample(path, format=None):
    """Read an ``(n, d)`` sample from CSV or NDJSON; the format defaults to the file suffix."""
    path = Path(path)
    if format is None:
        format = "ndjson" if path.suffix.lower() in (".ndjson", ".jsonl") else "csv"
    text = path.read_text()
    if format == "csv":
        return parse_csv(text)
    if format == "ndjson":
        return parse_ndjson(text)
    raise ParseError(f"unknown sample format {format!r}")


def save_sample_csv(path, data, column_names=None):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if column_names:
            w.writerow(column_names)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def load_model_spec(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", exc.lineno) from None
    return spec_from_dict(d), (d.get("label") if isinstance(d, dict) else None)


def load_model(path):
    """Build a ScoreModel from a JSON model-spec file."""
    spec, label = load_model_spec(path)
    return as_model(spec, label)
