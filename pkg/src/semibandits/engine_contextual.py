"""Contextual combinatorial FTRL engine with entropy regularization,
time-varying learning-rate schedule, uniform exploration mixing, and
geometric-resampling precision estimation.

The round structure: observe a context, solve the entropy-regularized FTRL
step over the capped simplex, decompose and sample an action mixed with
uniform exploration, observe semi-bandit losses, estimate per-arm precision
matrices from fresh policy samples, and accumulate per-arm loss-coefficient
estimates for the next round's objective.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .model import ActionVector, ProblemConfig, split_rng
from .projection import project_offsets
from .records import RunRecord
from .regularizer import neg_shannon
from .sampling import build_exploration_set, decompose, mix_exploration
from . import environment as envmod


class ScheduleInvariantError(AssertionError):
    """An exploration or learning-rate invariant failed; the configuration
    (sizes, horizon, lambda_min) is inconsistent."""


@dataclass(frozen=True)
class ScheduleState:
    """Learning-rate bookkeeping.

    beta_prime follows the inverse-sqrt-entropy recurrence; the cumulative
    iterate entropy feeds its increments.  All logarithms are shifted by one
    (ln(t+1), ln(T+1)) so round one is non-degenerate and the exploration
    rate stays at or below 1/2 for every t <= T.
    """

    c1: float
    c2: float
    lnT: float              # ln(T + 1)
    beta_prime: float
    cum_entropy: float = 0.0
    t: int = 1

    @property
    def beta(self) -> float:
        return max(2.0, self.c2 * self.lnT, self.beta_prime)


def schedule_constants(config: ProblemConfig) -> tuple[float, float]:
    """Problem-dependent constants c1, c2 (optionally rescaled).

    ``schedule_scale`` multiplies both; the exploration rate alpha_t is
    scaled by ``exploration_scale`` (defaulting to the same value, and
    never allowed to exceed it), so every schedule invariant is preserved
    while the horizon at which learning becomes visible shrinks.
    """
    K, m, d, T = config.K, config.m, config.d, config.T
    if m >= K:
        raise ScheduleInvariantError("contextual schedule needs m < K")
    lam = config.lambda_min
    lnT = math.log(T + 1.0)
    ent = m * math.log(K / m)
    s = config.schedule_scale
    c1 = s * math.sqrt((d + lnT / lam) * K * lnT / ent)
    c2 = s * 8.0 * K / lam
    return c1, c2


def schedule_init(config: ProblemConfig) -> ScheduleState:
    c1, c2 = schedule_constants(config)
    return ScheduleState(c1=c1, c2=c2, lnT=math.log(config.T + 1.0),
                         beta_prime=c1)


def schedule_params(state: ScheduleState, config: ProblemConfig):
    """Current round's (eta, alpha, gamma, M) with invariants asserted.

    ``M`` evaluates the sample-count formula literally, with gamma in the
    denominator; any rescaling of alpha is therefore compensated by M, and
    the estimation-bias bound keeps its 1/t^2 strength.
    """
    beta = state.beta
    eta = 1.0 / beta
    lam = config.lambda_min
    ln_t = math.log(state.t + 1.0)
    s_alpha = (config.exploration_scale if config.exploration_scale
               is not None else config.schedule_scale)
    alpha = s_alpha * 4.0 * config.K * ln_t / lam
    gamma = alpha * eta
    M = (math.ceil(config.mgr_scale * 4.0 * config.K * ln_t / (gamma * lam))
         if gamma > 0 else 0)
    if not eta <= 0.5 + 1e-12:
        raise ScheduleInvariantError(f"eta_{state.t} = {eta:g} exceeds 1/2")
    if not 0.0 <= gamma <= 0.5 + 1e-12:
        raise ScheduleInvariantError(f"gamma_{state.t} = {gamma:g} "
                                     "outside [0, 1/2]")
    return eta, alpha, gamma, M


def schedule_step(state: ScheduleState, new_entropy: float,
                  config: ProblemConfig):
    """Fold round t's iterate entropy into the state and advance to t+1.

    Returns the advanced state and its (eta, alpha, gamma, M).
    """
    ent_max = config.m * math.log(config.K / config.m)
    if not -1e-9 <= new_entropy <= ent_max + 1e-9:
        raise ScheduleInvariantError(
            f"entropy {new_entropy:g} outside [0, {ent_max:g}]")
    cum = state.cum_entropy + max(0.0, new_entropy)
    beta_prime = state.beta_prime + state.c1 / math.sqrt(1.0 + cum / ent_max)
    nxt = replace(state, beta_prime=beta_prime, cum_entropy=cum,
                  t=state.t + 1)
    return (nxt,) + schedule_params(nxt, config)


@dataclass(frozen=True)
class PrecisionEstimate:
    """Per-arm symmetric d x d estimates of the precision matrices."""

    matrices: np.ndarray   # (K, d, d)
    n_samples: int

    def op_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(mat, ord=2) for mat in self.matrices])


@dataclass
class CumulativeLoss:
    """Running per-arm sums of coefficient estimates; any context is scored
    in O(K d) as theta_sum @ x."""

    theta_sum: np.ndarray  # (K, d)

    def scores(self, context: np.ndarray) -> np.ndarray:
        return self.theta_sum @ context


def ftrl_mean_action(cumloss: CumulativeLoss, context: np.ndarray,
                     eta: float, config: ProblemConfig) -> np.ndarray:
    """Entropy-regularized FTRL step at the given context.

    With the entropy potential the subproblem reduces to the capped-simplex
    projection with offsets eta * cumulative score; equivalently the
    Bregman update anchored at the all-ones gradient point.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    c = eta * cumloss.scores(context)
    return project_offsets(c, config.m, neg_shannon(), config.eps_proj)


def iterate_entropy(abar: np.ndarray) -> float:
    """Shannon entropy -sum a ln a with 0 ln 0 = 0."""
    a = np.asarray(abar, dtype=float)
    pos = a > 0.0
    return float(-(a[pos] * np.log(a[pos])).sum())


# ---------------------------------------------------------------------------
# Batched policy evaluation (used by the precision-estimation sampler).

def batch_mean_actions(offset_rows: np.ndarray, m: int) -> np.ndarray:
    """Exact entropy-potential minimizers for a batch of offset rows.

    Water-filling on exp(-c): cap coordinates whose softmax mass exceeds 1,
    renormalize the rest to the remaining cardinality.  At most m-1 cap
    levels exist, so the loop is short; the result matches the bisection
    solver to solver tolerance (it is the exact minimizer).
    """
    C = np.asarray(offset_rows, dtype=float)
    n, K = C.shape
    E = np.exp(C.min(axis=1, keepdims=True) - C)   # shifted, overflow-free
    capped = np.zeros((n, K), dtype=bool)
    for _ in range(max(1, m)):
        live = ~capped
        S = np.where(live, E, 0.0).sum(axis=1)
        k_active = m - capped.sum(axis=1)
        scale = np.where(S > 0, k_active / np.maximum(S, 1e-300), 0.0)
        viol = live & (E * scale[:, None] > 1.0)
        if not viol.any():
            break
        capped |= viol
    live = ~capped
    S = np.where(live, E, 0.0).sum(axis=1)
    k_active = m - capped.sum(axis=1)
    scale = np.where(S > 0, k_active / np.maximum(S, 1e-300), 0.0)
    out = np.where(capped, 1.0, E * scale[:, None])
    return out


def systematic_sample(means: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Draw exact-m actions with the given per-arm inclusion probabilities.

    Systematic sampling: cumulative sums crossed by the lattice u + Z mark
    the selected coordinates; each row selects exactly m arms and the
    marginals match ``means`` exactly.
    """
    means = np.asarray(means, dtype=float)
    n, K = means.shape
    m = int(round(float(means[0].sum())))
    uu = np.clip(u, 1e-12, 1.0 - 1e-12)[:, None]
    cums = np.cumsum(means, axis=1)
    lattice = np.floor(cums - uu)
    prev = np.concatenate([np.floor(-uu), lattice[:, :-1]], axis=1)
    bits = (lattice > prev).astype(np.int8)
    counts = bits.sum(axis=1)
    for i in np.nonzero(counts != m)[0]:      # float-edge repair, rare
        err = int(counts[i]) - m
        if err > 0:
            on = np.nonzero(bits[i])[0]
            order = on[np.argsort(means[i, on], kind="stable")]
            bits[i, order[:err]] = 0
        else:
            off = np.nonzero(bits[i] == 0)[0]
            order = off[np.argsort(-means[i, off], kind="stable")]
            bits[i, order[:-err]] = 1
    return bits


try:                                    # compiled kernel when available
    from numba import njit as _njit
except ImportError:                     # pragma: no cover
    _njit = None

if _njit is not None:
    @_njit(cache=True)
    def _scan_kernel(bits, X, sums):    # (M,K) uint8, (M,d) -> (K,d,d)
        M, K = bits.shape
        d = X.shape[1]
        C = np.empty((K, d, d))
        tmp = np.empty(d)
        for k in range(K):
            for i in range(d):
                for j in range(d):
                    C[k, i, j] = 1.0 if i == j else 0.0
                    sums[k, i, j] = 0.0
        for n in range(M):
            x = X[n]
            for k in range(K):
                if bits[n, k]:
                    for i in range(d):
                        s = 0.0
                        for j in range(d):
                            s += C[k, i, j] * x[j]
                        tmp[i] = 0.5 * s
                    for i in range(d):
                        for j in range(d):
                            C[k, i, j] -= tmp[i] * x[j]
                for i in range(d):
                    for j in range(d):
                        sums[k, i, j] += C[k, i, j]


def mgr_scan(actions: np.ndarray, contexts: np.ndarray) -> np.ndarray:
    """Sum over n of the running products prod_{j<=n}(I - A_jk x_j x_j^T / 2).

    Dispatches to a compiled sequential kernel when numba is importable,
    else to a vectorized masked doubling scan; both return the (K, d, d)
    sums exactly.
    """
    A = np.ascontiguousarray(actions, dtype=np.uint8)
    X = np.ascontiguousarray(contexts, dtype=float)
    if _njit is not None:
        sums = np.empty((A.shape[1], X.shape[1], X.shape[1]))
        _scan_kernel(A, X, sums)
        return sums
    return _mgr_scan_numpy(A, X)


def _mgr_scan_numpy(actions: np.ndarray, contexts: np.ndarray) -> np.ndarray:
    """Masked doubling scan over per-arm hit factors, gap-weighted: between
    consecutive hits the running product is constant."""
    A = np.asarray(actions)
    X = np.asarray(contexts, dtype=float)
    M, K = A.shape
    d = X.shape[1]
    eye = np.eye(d)
    sums = np.empty((K, d, d))
    arm_ids, ns = np.nonzero(A.T)          # hits in (arm, draw) order
    counts = np.bincount(arm_ids, minlength=K)
    no_hit = counts == 0
    sums[no_hit] = M * eye
    if len(ns) == 0:
        return sums
    # Factors I - x x^T / 2 for each hit, in arm-major order.
    xs = X[ns]
    P = eye[None, :, :] - 0.5 * xs[:, :, None] * xs[:, None, :]
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    idx = np.arange(len(ns))
    offset = 1
    max_len = int(counts.max())
    while offset < max_len:
        can = idx - offset >= starts
        P[can] = P[idx[can] - offset] @ P[can]
        offset *= 2
    # Weight each running product by the number of draws it persists for.
    seg_end = np.concatenate([starts[1:] != starts[:-1], [True]])
    nxt = np.empty(len(ns), dtype=np.int64)
    nxt[:-1] = ns[1:]
    nxt[np.nonzero(seg_end)[0]] = M
    gaps = (nxt - ns).astype(float)
    weighted = P.reshape(len(ns), d * d) * gaps[:, None]
    offsets_per_arm = (np.cumsum(counts) - counts)[~no_hit]
    segsums = np.add.reduceat(weighted, offsets_per_arm, axis=0)
    first_hit = ns[offsets_per_arm]
    hit_arms = np.nonzero(~no_hit)[0]
    sums[hit_arms] = (segsums.reshape(-1, d, d)
                      + first_hit[:, None, None] * eye)
    return sums


def mgr_estimate(policy_sampler, context_source, M: int,
                 config: ProblemConfig) -> PrecisionEstimate:
    """Precision-matrix estimation from M fresh policy samples.

    ``context_source(M)`` returns an (M, d) batch of i.i.d. contexts and
    ``policy_sampler(contexts)`` the matching (M, K) actions under the
    current mixed policy.  The running matrix products are accumulated
    incrementally; the estimate is (I + sum_n C_n) / 2, symmetrized.
    """
    eye = np.eye(config.d)
    if M <= 0:
        mats = np.repeat(eye[None, :, :] * 0.5, config.K, axis=0)
        return PrecisionEstimate(matrices=mats, n_samples=0)
    X = np.asarray(context_source(M), dtype=float)
    A = np.asarray(policy_sampler(X))
    sums = mgr_scan(A, X)
    mats = 0.5 * (eye[None, :, :] + sums)
    mats = 0.5 * (mats + np.transpose(mats, (0, 2, 1)))  # enforce symmetry
    return PrecisionEstimate(matrices=mats, n_samples=M)


def theta_tilde(precision: PrecisionEstimate, context: np.ndarray,
                losses: np.ndarray, action: ActionVector) -> np.ndarray:
    """Per-arm coefficient estimates Sigma_plus_k x * loss_k * played_k."""
    base = precision.matrices @ np.asarray(context, dtype=float)   # (K, d)
    w = np.asarray(losses, dtype=float) * action.bits
    return base * w[:, None]


class _MixedPolicySampler:
    """Samples batched actions from the engine's current mixed policy.

    Mean actions for fresh contexts are solved exactly by water-filling
    (same subproblem and tolerance as the played path), actions are drawn
    by systematic sampling, and with probability gamma a uniform
    exploration action is substituted.  Marginals therefore match the
    played policy's exactly, which is all the precision estimator needs.
    """

    def __init__(self, cumloss, eta, gamma, e_bits, m, rng):
        self.cumloss = cumloss
        self.eta = eta
        self.gamma = gamma
        self.e_bits = e_bits
        self.m = m
        self.rng = rng

    def __call__(self, contexts: np.ndarray) -> np.ndarray:
        n = contexts.shape[0]
        offs = self.eta * (contexts @ self.cumloss.theta_sum.T)
        means = batch_mean_actions(offs, self.m)
        bits = systematic_sample(means, self.rng.random(n))
        if self.gamma > 0.0:
            explore = self.rng.random(n) < self.gamma
            n_exp = int(explore.sum())
            if n_exp:
                rows = self.rng.integers(len(self.e_bits), size=n_exp)
                bits[explore] = self.e_bits[rows]
        return bits


def run_contextual(env: "envmod.SyntheticEnv", config: ProblemConfig,
                   run_id: int = 0, on_round=None):
    """Full engine loop; yields one RunRecord per round.

    ``on_round`` (optional) receives a dict of round internals (iterate,
    precision estimate, schedule parameters) for diagnostics and tests.
    Any error aborts the run with a diagnostic record via the exception.
    """
    K, m, d = config.K, config.m, config.d
    state = schedule_init(config)
    eta, alpha, gamma, M = schedule_params(state, config)
    cumloss = CumulativeLoss(theta_sum=np.zeros((K, d)))
    e_set = build_exploration_set(K, m, config.n_slack)
    e_bits = np.stack([a.bits for a in e_set])
    rng_act = split_rng(config.seed, 20, run_id)
    rng_mgr = split_rng(config.seed, 21, run_id)

    for t in range(1, config.T + 1):
        x = env.context(t)
        t0 = time.perf_counter_ns()
        abar = ftrl_mean_action(cumloss, x, eta, config)
        decomp = decompose(abar, m)
        action = mix_exploration(decomp, gamma, e_set, rng_act)
        t_learn = time.perf_counter_ns() - t0
        observed = env.feedback(t, action)
        t1 = time.perf_counter_ns()
        sampler = _MixedPolicySampler(cumloss, eta, gamma, e_bits, m, rng_mgr)
        precision = mgr_estimate(sampler, env.sample_contexts, M, config)
        th = theta_tilde(precision, x, observed, action)
        cumloss.theta_sum += th
        h = iterate_entropy(abar)
        if on_round is not None:
            on_round({"t": t, "abar": abar, "context": x, "action": action,
                      "precision": precision, "theta_tilde": th,
                      "eta": eta, "alpha": alpha, "gamma": gamma, "M": M,
                      "entropy": h})
        wall = t_learn + (time.perf_counter_ns() - t1)
        cum_regret = float(env.cum_regret)
        rec = RunRecord(
            run_id=run_id, seed=config.seed, t=t, regime=env.spec.regime,
            algo="ftrl", K=K, m=m, d=d,
            action="".join(map(str, action.bits.tolist())),
            round_loss=float(observed @ action.bits),
            cum_regret=cum_regret, eta_t=eta, gamma_t=gamma, M_t=M,
            entropy_t=h, wall_ns=wall)
        if t < config.T:    # the invariants are guaranteed for t <= T only
            state, eta, alpha, gamma, M = schedule_step(state, h, config)
        yield rec
