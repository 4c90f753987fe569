"""Context-free online stochastic mirror descent for m-set semi-bandits.

Each round: decompose the iterate, sample an action, observe the played
coordinates' losses, importance-weight them, and Bregman-project the
loss-shifted iterate back onto the capped simplex.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .model import ActionVector, ProblemConfig
from .projection import bisect_project
from .regularizer import RegularizerSpec, QUADRATIC
from .records import RunRecord
from .sampling import decompose, sample_action
from . import environment as envmod


class DivisionGuardError(RuntimeError):
    """Importance weight would divide by a vanishing inclusion probability;
    signals a mis-tuned learning rate rather than corrupting estimates."""


@dataclass(frozen=True)
class OsmdState:
    abar: np.ndarray
    eta: float
    reg: RegularizerSpec
    round: int = 0


def default_learning_rate(config: ProblemConfig) -> float:
    """Fixed rate sqrt(m ln(K/m) / (K T)), the standard adversarial tuning."""
    return math.sqrt(config.m * math.log(config.K / config.m)
                     / (config.K * config.T))


def osmd_init(config: ProblemConfig, reg: RegularizerSpec,
              eta: float | None = None) -> OsmdState:
    """Start from the uniform point m/K, the symmetric minimizer of every
    separable potential over the capped simplex."""
    if eta is None:
        eta = default_learning_rate(config)
    if not eta > 0:
        raise ValueError("learning rate must be positive")
    abar = np.full(config.K, config.m / config.K)
    return OsmdState(abar=abar, eta=eta, reg=reg, round=0)


def importance_weighted(action: ActionVector, losses: np.ndarray,
                        abar: np.ndarray) -> np.ndarray:
    """Unbiased full-vector loss estimate: observed loss over inclusion
    probability on the played coordinates, zero elsewhere."""
    bits = action.bits.astype(float)
    obs = bits > 0
    if (abar[obs] < 1e-12).any():
        raise DivisionGuardError("inclusion probability below 1e-12 on an "
                                 "observed coordinate")
    out = np.zeros_like(abar)
    out[obs] = losses[obs] / abar[obs]
    return out


def _respect_floor(a: np.ndarray, m: int, reg: RegularizerSpec) -> np.ndarray:
    """Keep iterate coordinates at or above the potential's floor.

    The projection's final clip may zero a coordinate; the singular
    potentials need it strictly positive next round.  The lifted mass is
    removed from the largest coordinate to preserve the sum.
    """
    if reg.kind == QUADRATIC:
        return a
    lifted = np.maximum(a, reg.floor)
    excess = lifted.sum() - a.sum()
    if excess > 0.0:
        lifted[int(np.argmax(lifted))] -= excess
    return lifted


def osmd_update(state: OsmdState, action: ActionVector,
                observed_losses: np.ndarray,
                config: ProblemConfig) -> OsmdState:
    """Estimation plus projection for one observed action."""
    lhat = importance_weighted(action, observed_losses, state.abar)
    new = bisect_project(state.eta, lhat, state.abar, config, state.reg)
    new = _respect_floor(new, config.m, state.reg)
    return replace(state, abar=new, round=state.round + 1)


def osmd_round(state: OsmdState, env_feedback, config: ProblemConfig,
               rng: np.random.Generator):
    """Play one round: sample, observe, update.

    ``env_feedback(action)`` must return the per-arm losses on the played
    coordinates (entries off the action's support are ignored).
    """
    t0 = time.perf_counter_ns()
    decomp = decompose(state.abar, config.m)
    action = sample_action(decomp, rng)
    t_sample = time.perf_counter_ns() - t0
    observed = np.asarray(env_feedback(action), dtype=float)
    t1 = time.perf_counter_ns()
    new_state = osmd_update(state, action, observed, config)
    wall = t_sample + (time.perf_counter_ns() - t1)
    record = {
        "t": new_state.round,
        "action": action,
        "round_loss": float(observed @ action.bits),
        "eta": state.eta,
        "wall_ns": wall,
    }
    return new_state, record


def run_osmd(env: "envmod.SyntheticEnv", config: ProblemConfig,
             reg: RegularizerSpec, run_id: int = 0,
             eta: float | None = None):
    """Drive a full context-free run against a synthetic environment,
    yielding one RunRecord per round."""
    from .model import split_rng

    state = osmd_init(config, reg, eta=eta)
    rng = split_rng(config.seed, 10, run_id)
    cum_regret = 0.0
    for t in range(1, config.T + 1):
        env.context(t)

        def feedback(action, _t=t):
            return env.feedback(_t, action)

        state, rec = osmd_round(state, feedback, config, rng)
        cum_regret = env.cum_regret
        h = float(-np.sum(np.where(state.abar > 0,
                                   state.abar * np.log(
                                       np.maximum(state.abar, 1e-300)), 0.0)))
        yield RunRecord(
            run_id=run_id, seed=config.seed, t=t, regime=env.spec.regime,
            algo="osmd", K=config.K, m=config.m, d=config.d,
            action="".join(map(str, rec["action"].bits.tolist())),
            round_loss=rec["round_loss"], cum_regret=float(cum_regret),
            eta_t=state.eta, gamma_t=0.0, M_t=0, entropy_t=h,
            wall_ns=rec["wall_ns"])
