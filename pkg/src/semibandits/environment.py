"""Synthetic semi-bandit environments: stochastic, adversarial, and corrupted
stochastic loss streams over i.i.d. contexts, with ground-truth optima
retained for pseudo-regret."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ActionVector, InvariantError, split_rng

log = logging.getLogger(__name__)

ADVERSARIAL = "adversarial"
STOCHASTIC = "stochastic"
CORRUPTED = "corrupted"

_REGIMES = (ADVERSARIAL, STOCHASTIC, CORRUPTED)


@dataclass(frozen=True)
class EnvSpec:
    """Ground-truth description of a synthetic instance.

    ``theta`` holds the fixed coefficient rows (the reference parameters in
    the corrupted regime); adversarial mode additionally stores a phase
    schedule.  ``sigma`` is the exact context second-moment matrix of the
    context family, exposed to the learner as lambda_min only.
    """

    regime: str
    K: int
    m: int
    d: int
    theta: np.ndarray                  # (K, d) reference coefficients
    noise_bound: float = 0.0
    corruption_budget: float = 0.0
    context_dist: dict = field(default_factory=lambda: {"family": "ball",
                                                        "r_min": 0.0})
    adv_phases: np.ndarray | None = None       # (P, K, d) schedule
    adv_boundaries: np.ndarray | None = None   # (P,) phase start rounds
    exact_m: bool = True
    n_slack: int = 0

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise InvariantError(f"unknown regime {self.regime!r}")
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.K, self.d):
            raise InvariantError("theta must have shape (K, d)")
        if (np.linalg.norm(theta, axis=1) > 1.0 + 1e-12).any():
            raise InvariantError("coefficient row norm exceeds 1")
        if self.noise_bound < 0 or self.corruption_budget < 0:
            raise InvariantError("noise bound and budget must be nonnegative")
        if self.adv_phases is not None:
            ph = np.asarray(self.adv_phases, dtype=float)
            if (np.linalg.norm(ph, axis=2) > 1.0 + 1e-12).any():
                raise InvariantError("scheduled coefficient norm exceeds 1")
        object.__setattr__(self, "theta", theta)

    @property
    def sigma(self) -> np.ndarray:
        """Exact E[x x^T] of the context family."""
        fam = self.context_dist.get("family", "ball")
        if fam == "constant":
            x = np.zeros(self.d)
            x[0] = 1.0
            return np.outer(x, x)
        if fam == "shifted_ball":
            # x = (v0 + rho w) / (1 + rho), w uniform in the unit ball:
            # E[w w^T] = I / (d + 2).
            rho = float(self.context_dist.get("rho", 0.8))
            v0 = np.zeros(self.d)
            v0[0] = 1.0
            return ((np.outer(v0, v0) + rho * rho * np.eye(self.d)
                     / (self.d + 2)) / (1.0 + rho) ** 2)
        r0 = float(self.context_dist.get("r_min", 0.0))
        # E[r^2] for r ~ U[r0, 1]; isotropic direction contributes I/d.
        er2 = (1.0 + r0 + r0 * r0) / 3.0
        return (er2 / self.d) * np.eye(self.d)

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma).min())

    def export_theta(self, path: str) -> None:
        """Write ground-truth coefficients to a JSON sidecar for audit."""
        payload = {"regime": self.regime, "K": self.K, "m": self.m,
                   "d": self.d, "theta": self.theta.tolist(),
                   "noise_bound": self.noise_bound,
                   "corruption_budget": self.corruption_budget}
        if self.adv_phases is not None:
            payload["adv_phases"] = np.asarray(self.adv_phases).tolist()
            payload["adv_boundaries"] = np.asarray(self.adv_boundaries).tolist()
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)


_ENV_FIELDS = {
    "regime": str, "K": int, "m": int, "d": int, "seed": int,
    "noise_bound": float, "corruption_budget": float, "r_min": float,
    "n_phases": int, "T": int, "n_slack": int,
    "context_family": lambda s: None if s.strip().lower() in ("", "none")
    else s.strip(),
    "theta_style": lambda s: None if s.strip().lower() in ("", "none")
    else s.strip(),
    "rho": float,
}


def save_env_config(path: str, **params) -> None:
    """Write make_env_spec keyword arguments as an [environment] section."""
    import configparser

    parser = configparser.ConfigParser()
    parser.optionxform = str
    unknown = set(params) - set(_ENV_FIELDS)
    if unknown:
        raise KeyError(f"unknown environment keys {sorted(unknown)}")
    parser["environment"] = {k: str(v) for k, v in params.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def load_env_config(path: str) -> dict:
    """Read an [environment] section back into make_env_spec kwargs."""
    import configparser

    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("environment"):
        raise KeyError(f"{path}: missing [environment] section")
    out = {}
    for key, raw in parser.items("environment"):
        if key not in _ENV_FIELDS:
            raise KeyError(f"{path}: unknown environment key {key!r}")
        out[key] = _ENV_FIELDS[key](raw)
    return out


def env_spec_from_config(path: str) -> EnvSpec:
    """Reconstruct the exact instance from a config file: the section holds
    the construction parameters (seeded), not the coefficient matrix."""
    return make_env_spec(**load_env_config(path))


def _random_theta(K: int, d: int, rng: np.random.Generator,
                  norm: float = 0.6) -> np.ndarray:
    """Rows uniform on the sphere of radius ``norm`` (slack rows are zeroed
    by the caller)."""
    v = rng.normal(size=(K, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return norm * v


def _spread_theta(K: int, d: int, rng: np.random.Generator,
                  norm: float = 0.6) -> np.ndarray:
    """Collinear rows c_k e1 with distinct magnitudes in [-norm, norm].

    Arm order is shuffled so arm index carries no information.  Combined
    with a context family keeping <x, e1> positive this yields a fixed
    optimal action map with a strictly positive suboptimality gap.
    """
    c = np.linspace(-norm, norm, K)
    rng.shuffle(c)
    theta = np.zeros((K, d))
    theta[:, 0] = c
    return theta

def make_env_spec(regime: str, K: int, m: int, d: int, seed: int,
                  noise_bound: float = 0.2, corruption_budget: float = 0.0,
                  r_min: float = 0.0, n_phases: int = 8, T: int = 0,
                  n_slack: int = 0, context_family: str | None = None,
                  theta_style: str | None = None, rho: float = 0.8) -> EnvSpec:
    """Construct a reproducible instance of the requested regime.

    Coefficient rows have norm at most 0.6 so that noise up to 0.2 and
    sign-flip corruption keep every realized loss inside [-1, 1] without
    the safety clip binding.  The last ``n_slack`` arms carry zero loss.

    Regime defaults: stochastic and corrupted instances pair spread
    collinear coefficients with the shifted-ball context family (strictly
    positive suboptimality gap, which the logarithmic guarantee needs);
    the adversarial instance switches coefficients over doubling-length
    phases by order-preserving affine drift c -> a_p c + b_p on every arm,
    and pins the pair of arms straddling the subset boundary at a gap of
    order 1/sqrt(T), so that the decisive comparison stays statistically
    unresolvable over the whole horizon (the shape of the matching minimax
    lower-bound instance).
    """
    rng = split_rng(seed, 100)
    if context_family is None:
        context_family = "shifted_ball"
    if theta_style is None:
        theta_style = "spread"
    if theta_style == "spread":
        theta = _spread_theta(K, d, rng)
    else:
        theta = _random_theta(K, d, rng)
    if n_slack:
        theta[K - n_slack:] = 0.0
    adv_phases = None
    adv_boundaries = None
    noise = noise_bound
    if regime == ADVERSARIAL:
        horizon = max(2, T or 2)
        # Doubling phases: starts at 1, 2, 4, ..., <= horizon.
        n_ph = int(math.floor(math.log2(horizon))) + 1
        adv_boundaries = np.minimum(2 ** np.arange(n_ph), horizon)
        a = rng.uniform(0.5, 1.0, size=n_ph)
        b = rng.uniform(-0.2, 0.2, size=n_ph)
        if theta_style == "spread":
            adv_phases = a[:, None, None] * theta[None, :, :]
            adv_phases[:, :, 0] += b[:, None]
            real = K - n_slack
            if real > m:
                c = theta[:real, 0]
                order = np.argsort(c, kind="stable")
                lo_arm, hi_arm = order[m - 1], order[m]
                mid = 0.5 * (c[lo_arm] + c[hi_arm])
                room = 0.45 * (c[hi_arm] - c[lo_arm])
                half_gap = min(0.7 * room, 3.5 / math.sqrt(horizon))
                adv_phases[:, lo_arm, 0] = a * (mid - half_gap) + b
                adv_phases[:, hi_arm, 0] = a * (mid + half_gap) + b
        else:
            adv_phases = np.stack([_random_theta(K, d, rng)
                                   for _ in range(n_ph)])
        if n_slack:
            adv_phases[:, K - n_slack:, :] = 0.0
        # Hindsight reference: realized-length-weighted phase average.
        ends = np.append(adv_boundaries[1:], horizon + 1)
        lengths = (ends - adv_boundaries).astype(float)
        w = lengths / lengths.sum()
        theta = np.tensordot(w, adv_phases, axes=1)
        noise = 0.0
    dist = {"family": context_family, "r_min": r_min, "rho": rho}
    return EnvSpec(regime=regime, K=K, m=m, d=d, theta=theta,
                   noise_bound=noise, corruption_budget=corruption_budget,
                   context_dist=dist, adv_phases=adv_phases,
                   adv_boundaries=adv_boundaries, n_slack=n_slack)


def sample_context(spec: EnvSpec, rng: np.random.Generator) -> np.ndarray:
    return sample_contexts(spec, 1, rng)[0]


def sample_contexts(spec: EnvSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. contexts with ||x|| <= 1 always.

    Families: ``ball`` (default), x = r u with u uniform on the unit sphere
    and r uniform on [r_min, 1]; ``shifted_ball``, x = (v0 + rho w)/(1+rho)
    with w uniform in the unit ball, which keeps <x, v0> bounded away from
    zero; ``constant``, the first basis vector.
    """
    fam = spec.context_dist.get("family", "ball")
    if fam == "constant":
        out = np.zeros((n, spec.d))
        out[:, 0] = 1.0
        return out
    u = rng.normal(size=(n, spec.d))
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    # Resample the (measure-zero) zero vector defensively.
    bad = norms[:, 0] == 0.0
    if bad.any():
        u[bad] = rng.normal(size=(int(bad.sum()), spec.d))
        norms = np.linalg.norm(u, axis=1, keepdims=True)
    u /= norms
    if fam == "shifted_ball":
        rho = float(spec.context_dist.get("rho", 0.8))
        radii = rng.random((n, 1)) ** (1.0 / spec.d)
        w = radii * u
        x = w * rho
        x[:, 0] += 1.0
        return x / (1.0 + rho)
    r0 = float(spec.context_dist.get("r_min", 0.0))
    r = rng.uniform(r0, 1.0, size=(n, 1))
    return r * u


class _CorruptionState:
    __slots__ = ("remaining", "exhausted_logged")

    def __init__(self, budget: float):
        self.remaining = budget
        self.exhausted_logged = False


def theta_at(spec: EnvSpec, t: int) -> np.ndarray:
    """Pre-corruption coefficients active in round t."""
    if spec.regime == ADVERSARIAL and spec.adv_phases is not None:
        phase = int(np.searchsorted(spec.adv_boundaries, t, side="right")) - 1
        return spec.adv_phases[max(0, phase)]
    return spec.theta


def gen_losses(spec: EnvSpec, t: int, context: np.ndarray,
               rng: np.random.Generator,
               corruption_state: _CorruptionState | None = None):
    """Hidden per-arm losses for round t and the corruption spent.

    Losses are clipped to [-1, 1]; with the shipped constructors the clip
    never binds.  Corrupted mode negates the coefficient rows while budget
    remains (cost per round: sum of the m largest row perturbation norms),
    then silently reverts to the stochastic stream.
    """
    theta_t = theta_at(spec, t)
    spent = 0.0
    if spec.regime == CORRUPTED and corruption_state is not None:
        norms = np.linalg.norm(2.0 * spec.theta, axis=1)
        cost = float(np.sort(norms)[-spec.m:].sum())
        if corruption_state.remaining >= cost > 0.0:
            theta_t = -spec.theta
            corruption_state.remaining -= cost
            spent = cost
        elif not corruption_state.exhausted_logged and spec.corruption_budget > 0:
            log.info("corruption budget exhausted at round %d", t)
            corruption_state.exhausted_logged = True
    losses = theta_t @ context
    if spec.noise_bound > 0.0:
        losses = losses + rng.uniform(-spec.noise_bound, spec.noise_bound,
                                      size=spec.K)
    if spec.n_slack:
        losses[spec.K - spec.n_slack:] = 0.0
    return np.clip(losses, -1.0, 1.0), spent


def optimal_action(context: np.ndarray, theta: np.ndarray, m: int,
                   exact_m: bool) -> ActionVector:
    """Loss-minimizing action for known coefficients; ties go to low index."""
    scores = np.asarray(theta, dtype=float) @ np.asarray(context, dtype=float)
    K = scores.shape[0]
    order = np.argsort(scores, kind="stable")
    if exact_m:
        return ActionVector.from_indices(K, order[:m])
    neg = [k for k in order[:m] if scores[k] < 0.0]
    return ActionVector.from_indices(K, neg)


def delta_min(spec: EnvSpec, n_grid: int = 1000, seed: int = 0) -> float:
    """Sampled lower bound on the minimum suboptimality gap.

    Minimizes, over a context grid, the gap between the (m+1)-th and m-th
    smallest per-arm losses; 0 flags a degenerate (tied) instance.  The true
    infimum over a continuous family may be smaller; this is a diagnostic.
    """
    if spec.m >= spec.K:
        return 0.0
    rng = split_rng(seed, 900)
    xs = sample_contexts(spec, n_grid, rng)
    scores = xs @ spec.theta.T                      # (n, K)
    part = np.partition(scores, (spec.m - 1, spec.m), axis=1)
    gaps = part[:, spec.m] - part[:, spec.m - 1]
    val = float(gaps.min())
    if val <= 0.0:
        log.warning("degenerate instance: zero suboptimality gap on the grid")
    return val


class SyntheticEnv:
    """One run's environment: draws contexts and losses, retains the hidden
    stream, and scores pseudo-regret against the ground-truth action map.

    The learner-facing surface is ``context``, ``feedback``, and the i.i.d.
    context oracle ``sample_contexts``; everything else is bookkeeping that
    never leaks into the learner state.
    """

    def __init__(self, spec: EnvSpec, T: int, seed: int, run_id: int = 0):
        self.spec = spec
        self.T = T
        self._rng_ctx = split_rng(seed, 1, run_id)
        self._rng_noise = split_rng(seed, 2, run_id)
        self._rng_oracle = split_rng(seed, 3, run_id)
        self._corr = _CorruptionState(spec.corruption_budget)
        self.contexts = np.zeros((T, spec.d))
        self.realized = np.zeros((T, spec.K))
        self.clean_opt = np.zeros(T)       # <x, theta_ref> summed over u*(x)
        self.spent = np.zeros(T)
        self.round_regret = np.zeros(T)
        self.played = np.zeros((T, spec.K), dtype=np.int8)
        self.cum_regret = 0.0

    def context(self, t: int) -> np.ndarray:
        x = sample_context(self.spec, self._rng_ctx)
        self.contexts[t - 1] = x
        return x

    def feedback(self, t: int, action: ActionVector) -> np.ndarray:
        """Semi-bandit feedback: losses on the played coordinates only."""
        x = self.contexts[t - 1]
        losses, spent = gen_losses(self.spec, t, x, self._rng_noise, self._corr)
        ustar = optimal_action(x, self.spec.theta, self.spec.m,
                               self.spec.exact_m)
        self.realized[t - 1] = losses
        self.spent[t - 1] = spent
        # Pre-noise, pre-corruption losses score the optimum (round-t
        # coefficients in the adversarial regime, the fixed ones otherwise).
        self.clean_opt[t - 1] = float((theta_at(self.spec, t) @ x) @ ustar.bits)
        self.played[t - 1] = action.bits
        played_loss = float(losses @ action.bits)
        self.round_regret[t - 1] = played_loss - self.clean_opt[t - 1]
        self.cum_regret += self.round_regret[t - 1]
        return losses * action.bits

    def sample_contexts(self, n: int) -> np.ndarray:
        return sample_contexts(self.spec, n, self._rng_oracle)

    def regret_series(self) -> np.ndarray:
        return np.cumsum(self.round_regret)

    @property
    def lambda_min(self) -> float:
        return self.spec.lambda_min


def pseudo_regret(records, env: SyntheticEnv) -> np.ndarray:
    """Cumulative pseudo-regret series for a finished run.

    Uses the realized (noisy, possibly corrupted) losses for the played
    action and the clean linear losses for the ground-truth optimum; the
    environment retains both.  ``records`` supplies the played actions in
    round order.
    """
    total = np.zeros(env.T)
    for rec in records:
        t = rec.t if hasattr(rec, "t") else int(rec["t"])
        bits_str = rec.action if hasattr(rec, "action") else rec["action"]
        bits = np.frombuffer(bits_str.encode(), dtype=np.uint8) - ord("0")
        total[t - 1] = float(env.realized[t - 1] @ bits) - env.clean_opt[t - 1]
    return np.cumsum(total)


def expected_uniform_regret(spec: EnvSpec, contexts: np.ndarray) -> float:
    """Exact expected cumulative regret of the uniform-random learner over
    the given context sequence (expectation over the action draw only)."""
    scores = contexts @ spec.theta.T
    per_round = (spec.m / spec.K) * scores.sum(axis=1)
    opt = np.sort(scores, axis=1)[:, :spec.m].sum(axis=1)
    return float((per_round - opt).sum())
