"""Flat row types for experiment output and their CSV serialization."""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, fields, astuple


@dataclass
class RunRecord:
    """One engine round: identity, played action, losses, and diagnostics."""

    run_id: int
    seed: int
    t: int
    regime: str
    algo: str
    K: int
    m: int
    d: int
    action: str            # bitstring over base arms, e.g. "0110"
    round_loss: float
    cum_regret: float
    eta_t: float
    gamma_t: float
    M_t: int
    entropy_t: float
    wall_ns: int


@dataclass
class BenchRecord:
    """One projection-benchmark iteration of one method."""

    regularizer: str
    method: str            # bisection | newton | reference
    K: int
    m: int
    iter_index: int
    wall_ns: int
    residual_error: float  # l2 distance to the reference solution
    bisection_steps: int


RUN_FIELDS = [f.name for f in fields(RunRecord)]
BENCH_FIELDS = [f.name for f in fields(BenchRecord)]

_CASTS = {int: int, float: float, str: str}


def write_csv(path: str, records, fields_list) -> None:
    """Write records as RFC-4180 CSV with a header row; '-' streams to stdout."""
    if path == "-":
        _write(sys.stdout, records, fields_list)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write(fh, records, fields_list)


def _write(fh, records, fields_list) -> None:
    writer = csv.writer(fh)
    writer.writerow(fields_list)
    for rec in records:
        writer.writerow(astuple(rec) if hasattr(rec, "__dataclass_fields__")
                        else rec)


def read_csv(path) -> tuple[list, list]:
    """Read a CSV into (header, rows of strings)."""
    if isinstance(path, io.TextIOBase):
        reader = csv.reader(path)
        rows = list(reader)
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def rows_to_records(header, rows, cls):
    """Parse string rows back into dataclass records of type cls."""
    spec = {f.name: f.type for f in fields(cls)}
    idx = {}
    for name in spec:
        if name not in header:
            raise KeyError(f"missing column {name!r}")
        idx[name] = header.index(name)
    out = []
    for row in rows:
        kwargs = {}
        for name, typ in spec.items():
            raw = row[idx[name]]
            caster = {"int": int, "float": float, "str": str}[
                typ if isinstance(typ, str) else typ.__name__]
            kwargs[name] = caster(raw)
        out.append(cls(**kwargs))
    return out
