"""Trace CSV export and re-ingestion.

Columns: ``step, x0 .. x{d-1}, accepted, direction, log_ratio``. Floats use
``repr`` (shortest round-tripping decimal, independent of locale). Row 0 is
the initial state with empty ``accepted`` and ``log_ratio``; ``direction`` is
0 for kinds that carry no direction.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Union

import numpy as np

from .samplers import ChainTrace


def trace_header(dim: int):
    return ["step", *[f"x{j}" for j in range(dim)], "accepted", "direction", "log_ratio"]


def format_trace(trace: ChainTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(trace.dim))
    for i, x in enumerate(trace.xs):
        acc = "" if i == 0 else str(int(trace.accepted[i - 1]))
        lr = "" if i == 0 else repr(float(trace.log_ratios[i - 1]))
        v = 0 if trace.vs is None else int(trace.vs[i])
        w.writerow([i, *[repr(float(c)) for c in x], acc, v, lr])
    return buf.getvalue()


def write_trace(trace: ChainTrace, path: Union[str, Path]) -> None:
    Path(path).write_text(format_trace(trace), encoding="utf-8", newline="")


def parse_trace(text: str, kind: str = "unknown") -> ChainTrace:
    """Inverse of :func:`format_trace`; positions and ratios are bit-exact.

    Momenta are not stored, so ``ps`` is ``None``. ``vs`` is ``None`` when
    every direction entry is 0.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty trace file")
    header = rows[0]
    if header[0] != "step" or header[-3:] != ["accepted", "direction", "log_ratio"]:
        raise ValueError("not a trace file: unexpected header")
    d = len(header) - 4
    if header[1:1 + d] != [f"x{j}" for j in range(d)]:
        raise ValueError("not a trace file: bad position columns")
    body = rows[1:]
    for k, r in enumerate(body):
        if len(r) != d + 4 or int(r[0]) != k:
            raise ValueError(f"trace row {k + 2}: malformed")
    xs = np.array([[float(c) for c in r[1:1 + d]] for r in body]).reshape(len(body), d)
    accepted = np.array([r[1 + d] == "1" for r in body[1:]], dtype=bool)
    vs = np.array([int(r[2 + d]) for r in body], dtype=int)
    lr = np.array([float(r[3 + d]) for r in body[1:]])
    return ChainTrace(kind, xs, accepted, lr, None, None if not np.any(vs) else vs)


def read_trace(path: Union[str, Path], kind: str = "unknown") -> ChainTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"), kind)
