"""Core domain types shared by all engines: actions, contexts, the capped
simplex, problem configuration, and seeded randomness."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

# Numeric tolerances used across the package.
SUM_TOL = 1e-10        # |sum(a) - m| allowed for a mean action
BINARY_TOL = 0.0       # action entries must be exactly 0/1
FLOOR = 1e-12          # domain floor for singular potentials


class InvariantError(ValueError):
    """A domain-type invariant was violated."""


@dataclass(frozen=True)
class ActionVector:
    """Binary incidence vector over K base arms, at most (or exactly) m ones."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int8)
        if bits.ndim != 1:
            raise InvariantError("action must be a 1-d vector")
        if bits.size and (bits & ~np.int8(1)).any():
            raise InvariantError("action entries must be 0 or 1")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def K(self) -> int:
        return self.bits.shape[0]

    def popcount(self) -> int:
        return int(self.bits.sum())

    def validate(self, m: int, exact_m: bool) -> None:
        pc = self.popcount()
        if exact_m and pc != m:
            raise InvariantError(f"action has {pc} ones, expected exactly {m}")
        if pc > m:
            raise InvariantError(f"action has {pc} ones, expected at most {m}")

    @classmethod
    def from_indices(cls, K: int, idx) -> "ActionVector":
        bits = np.zeros(K, dtype=np.int8)
        bits[list(idx)] = 1
        return cls(bits)


@dataclass(frozen=True)
class MeanAction:
    """Point of the capped simplex conv(A); the FTRL/OSMD iterate."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1:
            raise InvariantError("mean action must be a 1-d vector")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @property
    def K(self) -> int:
        return self.coords.shape[0]

    def validate(self, m: int, tol: float = SUM_TOL) -> None:
        c = self.coords
        if (c < -tol).any() or (c > 1.0 + tol).any():
            raise InvariantError("mean-action coordinate outside [0, 1]")
        if abs(float(c.sum()) - m) > tol:
            raise InvariantError(
                f"mean-action coordinates sum to {c.sum():.12g}, expected {m}"
            )


@dataclass(frozen=True)
class Context:
    """Feature vector x with ||x||_2 <= 1."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise InvariantError("context must be a 1-d vector")
        if np.linalg.norm(x) > 1.0 + 1e-12:
            raise InvariantError("context norm exceeds 1")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ProblemConfig:
    """Instance sizes and solver/learner inputs.

    ``lambda_min`` is the smallest eigenvalue of the context second-moment
    matrix, supplied to the learner (the synthetic environment exposes its
    true value).  ``schedule_scale`` jointly rescales the contextual
    engine's schedule constants; 1.0 keeps the canonical values.
    """

    K: int
    m: int
    T: int
    d: int = 1
    lambda_min: float = 1.0
    eps_proj: float = 1e-9
    exact_m: bool = True
    seed: int = 0
    n_slack: int = 0
    schedule_scale: float = 1.0
    exploration_scale: float | None = None
    mgr_scale: float = 1.0

    def __post_init__(self):
        if not (1 <= self.m <= self.K):
            raise InvariantError("need 1 <= m <= K")
        if self.T < 1:
            raise InvariantError("need T >= 1")
        if self.d < 1:
            raise InvariantError("need d >= 1")
        if not self.lambda_min > 0:
            raise InvariantError("need lambda_min > 0")
        if not self.eps_proj > 0:
            raise InvariantError("need eps_proj > 0")
        if not 0 <= self.n_slack <= self.K:
            raise InvariantError("slack arm count out of range")
        if not self.schedule_scale > 0:
            raise InvariantError("need schedule_scale > 0")
        if self.exploration_scale is not None:
            if not 0 < self.exploration_scale <= self.schedule_scale:
                raise InvariantError(
                    "need 0 < exploration_scale <= schedule_scale")
        if not self.mgr_scale > 0:
            raise InvariantError("need mgr_scale > 0")

    @property
    def n_real(self) -> int:
        """Number of non-slack arms."""
        return self.K - self.n_slack


def make_exact(config: ProblemConfig) -> ProblemConfig:
    """Return a configuration on the exact-m polytope.

    An at-most-m instance embeds into an exactly-m instance by appending m
    slack arms that carry identically zero loss; dropping the slack
    coordinates of any feasible point yields a point with coordinate sum
    <= m.  Exact-m configurations pass through unchanged.
    """
    if config.exact_m:
        return config
    return replace(config, K=config.K + config.m, exact_m=True,
                   n_slack=config.n_slack + config.m)


def split_rng(seed: int, *path: int) -> np.random.Generator:
    """Derive an independent generator from a root seed and a counter path.

    Every source of randomness in the package is keyed by ``(seed, path)``
    so runs are bit-reproducible and independent streams never overlap.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def _opt_float(s):
    s = s.strip().lower()
    return None if s in ("", "none") else float(s)


_PROBLEM_FIELDS = {
    "K": int, "m": int, "T": int, "d": int,
    "lambda_min": float, "eps_proj": float,
    "exact_m": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "seed": int, "n_slack": int, "schedule_scale": float,
    "exploration_scale": _opt_float, "mgr_scale": float,
}


def load_config(path: str) -> ProblemConfig:
    """Read a ProblemConfig from a key-value config file.

    The file uses INI syntax with a ``[problem]`` section whose keys match
    the ProblemConfig field names.  Unknown keys raise.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str            # field names are case-sensitive
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("problem"):
        raise KeyError(f"{path}: missing [problem] section")
    kwargs = {}
    for key, raw in parser.items("problem"):
        if key not in _PROBLEM_FIELDS:
            raise KeyError(f"{path}: unknown problem key {key!r}")
        kwargs[key] = _PROBLEM_FIELDS[key](raw)
    return ProblemConfig(**kwargs)


def save_config(config: ProblemConfig, path: str) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["problem"] = {k: str(getattr(config, k)) for k in _PROBLEM_FIELDS}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
