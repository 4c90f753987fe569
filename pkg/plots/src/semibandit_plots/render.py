"""Figure rendering for the benchmark and regret CSVs.

Reads only the documented CSV schemas and aggregates emitted columns;
no quantity is recomputed from raw losses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import NormalDist

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

RUNTIME_COLUMNS = ["regularizer", "method", "K", "m", "iter_index",
                   "wall_ns", "residual_error", "bisection_steps"]
REGRET_COLUMNS = ["run_id", "seed", "t", "regime", "algo", "K", "m", "d",
                  "action", "round_loss", "cum_regret", "eta_t", "gamma_t",
                  "M_t", "entropy_t", "wall_ns"]


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    kind: str                 # runtime | regret
    output: str
    ci_level: float = 0.95
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in ("runtime", "regret"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")


def _read(path: str, required: list) -> list:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty input")
    header = rows[0]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    idx = {c: header.index(c) for c in header}
    out = [{c: row[idx[c]] for c in header} for row in rows[1:]]
    if not out:
        raise SchemaError(f"{path}: no data rows")
    return out


def plot_runtime(spec: FigureSpec) -> str:
    """One panel per regularizer: mean per-iteration wall time against the
    arm count with a normal-approximation confidence band per method."""
    rows = _read(spec.input_csv, RUNTIME_COLUMNS)
    z = NormalDist().inv_cdf(0.5 + spec.ci_level / 2.0)
    regs = sorted({r["regularizer"] for r in rows})
    methods = sorted({r["method"] for r in rows})
    fig, axes = plt.subplots(1, len(regs), figsize=(6 * len(regs), 4.2),
                             squeeze=False, sharey=True)
    for ax, reg in zip(axes[0], regs):
        for method in methods:
            by_k = {}
            for r in rows:
                if r["regularizer"] == reg and r["method"] == method:
                    by_k.setdefault(int(r["K"]), []).append(
                        float(r["wall_ns"]) / 1e6)
            ks = sorted(by_k)
            mean = np.array([np.mean(by_k[k]) for k in ks])
            ci = np.array([
                z * np.std(by_k[k], ddof=1) / math.sqrt(len(by_k[k]))
                if len(by_k[k]) > 1 else 0.0 for k in ks])
            line, = ax.plot(ks, mean, marker="o", label=method)
            if (ci > 0).any():
                ax.fill_between(ks, mean - ci, mean + ci, alpha=0.2,
                                color=line.get_color(), linewidth=0)
        ax.set_title(reg)
        ax.set_xlabel("number of base arms K")
        ax.set_ylabel("per-iteration runtime [ms]")
        ax.legend()
    fig.suptitle(f"Per-iteration runtime "
                 f"({int(spec.ci_level * 100)}% confidence bands)")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return spec.output


def plot_regret(spec: FigureSpec) -> str:
    """Median cumulative regret per regime with interquartile bands across
    runs; optionally normalized panels R/sqrt(t) and R/ln(t)."""
    rows = _read(spec.input_csv, REGRET_COLUMNS)
    series = {}
    for r in rows:
        key = (r["regime"], int(r["run_id"]))
        series.setdefault(key, {})[int(r["t"])] = float(r["cum_regret"])
    regimes = sorted({k[0] for k in series})
    n_panels = 3 if spec.normalized else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 4.2),
                             squeeze=False, sharex=True)
    panels = [("cumulative regret", lambda t: np.ones_like(t))]
    if spec.normalized:
        panels += [("regret / sqrt(t)", lambda t: 1.0 / np.sqrt(t)),
                   ("regret / ln(t)", lambda t: 1.0 / np.log(np.maximum(t, 2)))]
    for ax, (label, scale) in zip(axes[0], panels):
        for regime in regimes:
            runs = [v for (rg, _), v in series.items() if rg == regime]
            ts = np.array(sorted(runs[0]))
            mat = np.stack([np.array([run[t] for t in ts]) for run in runs])
            w = scale(ts.astype(float))
            med = np.median(mat, axis=0) * w
            line, = ax.plot(ts, med, label=regime)
            if len(runs) > 1:
                q1 = np.quantile(mat, 0.25, axis=0) * w
                q3 = np.quantile(mat, 0.75, axis=0) * w
                ax.fill_between(ts, q1, q3, alpha=0.2,
                                color=line.get_color(), linewidth=0)
        ax.set_xlabel("round t")
        ax.set_ylabel(label)
        ax.legend()
    fig.suptitle("Cumulative regret (medians, interquartile bands)")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return spec.output
