"""Bregman projection onto the capped simplex {a in [0,1]^K : sum(a) = m}.

The FTRL/OSMD update step minimizes  eta*<a, lhat> + D_F(a, abar)  over the
capped simplex.  For separable F the KKT conditions collapse the
K-dimensional problem to a scalar root-finding problem in the dual variable
of the sum constraint:

    g(lam) = m - sum_k (f')^{-1}(-lam - c_k) = 0,
    c_k    = eta * lhat_k - f'(abar_k),

with the clamped inverse derivative resolving the box constraints.  g is
nondecreasing in lam, so bisection with an a-priori iteration count gives a
solution within any tolerance eps in the Euclidean norm.
"""

from __future__ import annotations

import logging
import math
from collections import namedtuple

import numpy as np

from .model import split_rng
from .regularizer import (RegularizerSpec, f_prime, f_value, f_prime_inverse,
                          lipschitz_constant, scalar_fprime, scalar_inverse,
                          scalar_inverse_deriv)

log = logging.getLogger(__name__)

Bracket = namedtuple("Bracket", ["lo", "hi"])


class BracketError(RuntimeError):
    """Dual bracket failed to straddle the root even after widening.

    Unreachable for a regularizer honouring the monotone clamped-inverse
    contract; raised to surface contract violations instead of looping.
    """


class ToleranceError(ValueError):
    """Approximate-oracle tolerance too large for the requested accuracy."""


def offsets(eta: float, lhat, abar, reg: RegularizerSpec) -> np.ndarray:
    """Per-coordinate dual offsets c_k = eta * lhat_k - f'(abar_k)."""
    fp = scalar_fprime(reg)
    lhat_l = np.asarray(lhat, dtype=float).tolist()
    abar_l = np.asarray(abar, dtype=float).tolist()
    c = [eta * l - fp(a) for l, a in zip(lhat_l, abar_l)]
    out = np.array(c)
    if not np.isfinite(out).all():
        raise ValueError("non-finite offset")
    return out


def initial_bracket(c, m: int, K: int, reg: RegularizerSpec) -> Bracket:
    """Dual search interval [min_k, max_k] of -c_k - f'(m/K)."""
    anchor = scalar_fprime(reg)(m / K)
    c_list = c.tolist() if isinstance(c, np.ndarray) else list(c)
    lo = hi = -c_list[0] - anchor
    for v in c_list[1:]:
        w = -v - anchor
        if w < lo:
            lo = w
        elif w > hi:
            hi = w
    return Bracket(lo, hi)


def residual(lam: float, c, m: int, reg: RegularizerSpec) -> float:
    """Scalar dual residual m - sum_k (f')^{-1}(-lam - c_k); nondecreasing."""
    c = np.asarray(c, dtype=float)
    return m - float(f_prime_inverse(reg, -lam - c).sum())


def bisection_steps(bracket: Bracket, K: int, reg: RegularizerSpec,
                    eps: float) -> int:
    """Iteration count ceil(log2(2 L sqrt(K) (hi - lo) / eps)); 0 if hi == lo."""
    width = bracket.hi - bracket.lo
    if width <= 0.0:
        return 0
    L = lipschitz_constant(reg)
    return max(0, math.ceil(math.log2(2.0 * L * math.sqrt(K) * width / eps)))


def _finalize(vals: np.ndarray, m: int) -> np.ndarray:
    """Mean-shift to coordinate sum m, clip to [0,1], redistribute clipped mass.

    The shift realizes the solver's return line a_k = m/K + v_k - mean(v);
    the clip plus proportional redistribution over strictly interior
    coordinates restores exact box feasibility (the adjusted mass is at most
    eps-scale, machine-scale after a converged solve).
    """
    v = vals.tolist() if isinstance(vals, np.ndarray) else list(vals)
    K = len(v)
    shift = (m - math.fsum(v)) / K
    a = [min(1.0, max(0.0, x + shift)) for x in v]
    delta = m - math.fsum(a)
    if delta != 0.0:
        if delta > 0.0:
            room = [1.0 - x if 0.0 < x < 1.0 else 0.0 for x in a]
            total = math.fsum(room)
            if total < delta:
                room = [1.0 - x for x in a]
                total = math.fsum(room)
            if total > 0.0:
                scale = min(delta, total) / total
                a = [min(1.0, x + scale * r) for x, r in zip(a, room)]
        else:
            mass = [x if 0.0 < x < 1.0 else 0.0 for x in a]
            total = math.fsum(mass)
            if total < -delta:
                mass = list(a)
                total = math.fsum(mass)
            if total > 0.0:
                scale = max(delta, -total) / total
                a = [max(0.0, x + scale * r) for x, r in zip(a, mass)]
    return np.array(a)


def _checked_bracket(g, bracket: Bracket, stats=None):
    """Verify g(lo) <= 0 <= g(hi), widening a few times before giving up."""
    lo, hi = bracket
    g_lo, g_hi = g(lo), g(hi)
    if stats is not None:
        stats["residual_evals"] = stats.get("residual_evals", 0) + 2
    width = max(1.0, hi - lo)
    attempts = 0
    while (g_lo > 0.0 or g_hi < 0.0) and attempts < 64:
        if g_lo > 0.0:
            lo -= width
            g_lo = g(lo)
        if g_hi < 0.0:
            hi += width
            g_hi = g(hi)
        width *= 2.0
        attempts += 1
        if stats is not None:
            stats["residual_evals"] += 1
    if g_lo > 0.0 or g_hi < 0.0:
        raise BracketError("dual residual does not change sign on the bracket")
    return Bracket(lo, hi)


def _make_residual(c: np.ndarray, m: int, inv):
    """Fast scalar residual closure over a coordinate loop."""
    neg_c = (-np.asarray(c, dtype=float)).tolist()

    def g(lam: float) -> float:
        s = 0.0
        for v in neg_c:
            s += inv(v - lam)
        return m - s

    return g


def project_offsets(c, m: int, reg: RegularizerSpec, eps: float,
                    stats: dict | None = None,
                    inv=None) -> np.ndarray:
    """Solve the capped-simplex subproblem given dual offsets c.

    Runs the deterministic bisection iteration count for tolerance ``eps``
    and returns a feasible point within ``eps`` of the exact minimizer in
    the Euclidean norm.
    """
    c = np.asarray(c, dtype=float)
    K = c.shape[0]
    if inv is None:
        inv = scalar_inverse(reg)
    bracket = initial_bracket(c, m, K, reg)
    steps = bisection_steps(bracket, K, reg, eps)
    if stats is not None:
        stats.update(bracket=bracket, iterations=steps, residual_evals=0)
    if steps == 0:
        # Constant offsets: symmetry makes the uniform point exact.
        if bracket.hi == bracket.lo:
            return np.full(K, m / K)
    neg_c = (-c).tolist()
    g = _make_residual(c, m, inv)
    lo, hi = _checked_bracket(g, bracket, stats)
    for _ in range(steps):
        lam = 0.5 * (lo + hi)
        if g(lam) > 0.0:
            hi = lam
        else:
            lo = lam
    if stats is not None:
        stats["residual_evals"] += steps
        stats["lambda"] = lo
    return _finalize([inv(v - lo) for v in neg_c], m)


def bisect_project(eta: float, lhat, abar, config, reg: RegularizerSpec,
                   stats: dict | None = None) -> np.ndarray:
    """Bregman-project the loss-shifted anchor onto the capped simplex.

    ``config`` supplies the subset size m and the tolerance eps_proj; the
    output satisfies sum(a) = m to within 1e-10, lies in [0,1] exactly, and
    is within eps_proj of the exact minimizer in l2.
    """
    c = offsets(eta, lhat, abar, reg)
    return project_offsets(c, config.m, reg, config.eps_proj, stats=stats)


def approx_oracle_project(eta: float, lhat, abar, config,
                          reg: RegularizerSpec, tau: float,
                          noise=None, strict: bool = False,
                          stats: dict | None = None) -> np.ndarray:
    """As bisect_project, with every inverse evaluation perturbed by up to tau.

    For tau <= eps / (2 sqrt(K)) the output stays within eps of the exact
    minimizer; ``strict=True`` raises when tau exceeds that threshold.  The
    output is mean-shifted so the coordinate sum equals m exactly.  ``noise``
    maps a dual argument to a perturbation in [-tau, tau]; by default a
    seeded uniform draw is used.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    c = offsets(eta, lhat, abar, reg)
    K = c.shape[0]
    if strict and tau > config.eps_proj / (2.0 * math.sqrt(K)):
        raise ToleranceError(
            f"oracle tolerance {tau:g} exceeds eps/(2 sqrt(K)) = "
            f"{config.eps_proj / (2.0 * math.sqrt(K)):g}")
    if noise is None:
        rng = split_rng(config.seed, 9901)

        def noise(z):
            return rng.uniform(-tau, tau)

    exact_inv = scalar_inverse(reg)

    def inv(z: float) -> float:
        return exact_inv(z) + noise(z)

    return project_offsets(c, config.m, reg, config.eps_proj,
                           stats=stats, inv=inv)


def reference_project(eta: float, lhat, abar, reg: RegularizerSpec,
                      m: int | None = None,
                      stats: dict | None = None) -> np.ndarray:
    """Ground-truth minimizer via exhaustive refinement of the dual root.

    Bisects the same residual until the bracket width falls below
    1e-14 * max(1, |lam|), independent of any Lipschitz-based iteration
    count; accurate to ~1e-12 per coordinate.  Intended as the verification
    oracle, not the production path.
    """
    abar = np.asarray(abar, dtype=float)
    if m is None:
        m = int(round(float(abar.sum())))
    c = offsets(eta, lhat, abar, reg)
    return reference_offsets(c, m, reg, stats=stats)


def reference_offsets(c, m: int, reg: RegularizerSpec,
                      stats: dict | None = None) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    K = c.shape[0]
    if K > 10_000:
        raise ValueError("reference solver is for desk-scale instances")
    inv = scalar_inverse(reg)
    bracket = initial_bracket(c, m, K, reg)
    if bracket.hi == bracket.lo:
        return np.full(K, m / K)
    g = _make_residual(c, m, inv)
    lo, hi = _checked_bracket(g, bracket, stats)
    iters = 0
    while hi - lo > 1e-14 * max(1.0, abs(lo), abs(hi)) and iters < 200:
        lam = 0.5 * (lo + hi)
        if lam == lo or lam == hi:
            break
        if g(lam) > 0.0:
            hi = lam
        else:
            lo = lam
        iters += 1
    if stats is not None:
        stats.update(iterations=iters, residual_evals=iters + 2, bracket=bracket,
                     **{"lambda": lo})
    return _finalize([inv(-v - lo) for v in c.tolist()], m)


def newton_baseline(eta: float, lhat, abar, config, reg: RegularizerSpec,
                    stats: dict | None = None) -> np.ndarray:
    """Damped Newton iteration on the dual residual, safeguarded by the bracket.

    Starts from the bracket midpoint; any Newton proposal that leaves the
    current bracket (or meets a flat derivative) falls back to a bisection
    step.  Same output contract and tolerance as bisect_project; exists as a
    runtime baseline.
    """
    c = offsets(eta, lhat, abar, reg)
    K = c.shape[0]
    m, eps = config.m, config.eps_proj
    inv = scalar_inverse(reg)
    dinv = scalar_inverse_deriv(reg)
    bracket = initial_bracket(c, m, K, reg)
    if stats is not None:
        stats.update(bracket=bracket, iterations=0, residual_evals=0,
                     safeguard_triggers=0)
    if bracket.hi == bracket.lo:
        return np.full(K, m / K)
    neg_c = (-c).tolist()

    def g_and_slope(lam: float):
        s = 0.0
        ds = 0.0
        for v in neg_c:
            z = v - lam
            s += inv(z)
            ds += dinv(z)
        return m - s, ds

    g = _make_residual(c, m, inv)
    lo, hi = _checked_bracket(g, bracket, stats)
    tol = eps / (2.0 * lipschitz_constant(reg) * math.sqrt(K))
    lam = 0.5 * (lo + hi)
    evals = 0
    safeguards = 0
    max_evals = 4 * bisection_steps(bracket, K, reg, eps) + 64
    while hi - lo > tol and evals < max_evals:
        val, slope = g_and_slope(lam)
        evals += 1
        if val > 0.0:
            hi = lam
        elif val < 0.0:
            lo = lam
        else:
            lo = hi = lam
            break
        if slope > 0.0:
            prop = lam - val / slope
        else:
            prop = lo - 1.0  # force the safeguard
        if not (lo < prop < hi):
            prop = 0.5 * (lo + hi)
            safeguards += 1
            log.debug("newton safeguard: bisection step on [%g, %g]", lo, hi)
        lam = prop
    if stats is not None:
        stats["iterations"] = evals
        stats["residual_evals"] += evals
        stats["safeguard_triggers"] = safeguards
        stats["lambda"] = lo
    return _finalize([inv(v - lo) for v in neg_c], m)


def subproblem_objective(eta: float, lhat, abar, a,
                         reg: RegularizerSpec) -> float:
    """Value of eta*<a, lhat> + D_F(a, abar) at a candidate point a."""
    a = np.asarray(a, dtype=float)
    abar = np.asarray(abar, dtype=float)
    lhat = np.asarray(lhat, dtype=float)
    div = (f_value(reg, a) - f_value(reg, abar)
           - f_prime(reg, abar) * (a - abar)).sum()
    return float(eta * (a @ lhat) + div)
