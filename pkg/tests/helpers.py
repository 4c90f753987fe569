"""Independent oracles shared by the test modules.

Everything here is implemented by a different algorithm than the code under
test: closed forms, finite breakpoint scans, exhaustive enumeration, or a
general-purpose constrained solver.
"""

import itertools

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy


def euclid_capped(y, m):
    """Euclidean projection of y onto {a in [0,1]^K : sum a = m}.

    Exact finite algorithm: a(tau) = clip(y + tau, 0, 1) has a piecewise
    linear, nondecreasing coordinate sum with breakpoints at -y_k and
    1 - y_k; locate the segment containing m and solve linearly.
    """
    y = np.asarray(y, dtype=float)
    bps = np.sort(np.concatenate([-y, 1.0 - y]))
    sums = np.clip(y[None, :] + bps[:, None], 0.0, 1.0).sum(axis=1)
    if m <= sums[0]:
        tau = bps[0]
    elif m >= sums[-1]:
        tau = bps[-1]
    else:
        i = int(np.searchsorted(sums, m))
        lo, hi = bps[i - 1], bps[i]
        mid = 0.5 * (lo + hi)   # interior point classifies the open segment
        inside = (y + mid > 0.0) & (y + mid < 1.0)
        slope = max(1, int(inside.sum()))
        tau = lo + (m - sums[i - 1]) / slope
    return np.clip(y + tau, 0.0, 1.0)


def softmax_update(abar, eta, lhat, m):
    """Multiplicative-weights closed form for the entropy potential,
    valid when no upper cap binds: abar_k e^{-eta lhat_k}, scaled to sum m."""
    w = np.asarray(abar) * np.exp(-eta * np.asarray(lhat))
    a = m * w / w.sum()
    if (a > 1.0 + 1e-12).any():
        raise ValueError("cap binds; closed form invalid")
    return a


def capped_softmax(weights, m):
    """Exact entropy-potential minimizer by recursive cap peeling.

    weights are the unnormalized exponentials; caps the largest coordinate
    whenever its share exceeds 1 and recurses on the remainder.
    """
    w = np.asarray(weights, dtype=float)
    a = np.empty_like(w)
    free = np.ones(len(w), dtype=bool)
    mm = float(m)
    for _ in range(len(w)):
        share = mm * w / w[free].sum()
        viol = free & (share > 1.0)
        if not viol.any():
            break
        idx = np.argmax(np.where(viol, w, -np.inf))
        a[idx] = 1.0
        free[idx] = False
        mm -= 1.0
    a[free] = mm * w[free] / w[free].sum()
    return a


def bregman_objective(a, eta, lhat, abar, kind):
    a = np.asarray(a, dtype=float)
    if kind == "NegShannon":
        f = xlogy(a, a) - a
        fb = xlogy(abar, abar) - abar
        fp = np.log(abar)
    elif kind == "Quadratic":
        f, fb, fp = a * a, abar * abar, 2.0 * abar
    else:
        f, fb, fp = -np.sqrt(a), -np.sqrt(abar), -0.5 / np.sqrt(abar)
    return float(eta * (a @ lhat) + (f - fb - fp * (a - abar)).sum())


def solve_capped_slsqp(eta, lhat, abar, m, kind, lo=0.0):
    """General-purpose constrained solve of the update subproblem."""
    K = len(lhat)
    x0 = np.full(K, m / K)
    res = minimize(
        bregman_objective, x0, args=(eta, lhat, abar, kind),
        method="SLSQP",
        bounds=[(lo, 1.0)] * K,
        constraints=[{"type": "eq", "fun": lambda a: a.sum() - m}],
        options={"maxiter": 500, "ftol": 1e-14})
    assert res.success, res.message
    return res.x


def best_subset(scores, m):
    """Exhaustive minimizer of sum of scores over exactly-m subsets."""
    K = len(scores)
    best, best_val = None, np.inf
    for comb in itertools.combinations(range(K), m):
        v = sum(scores[k] for k in comb)
        if v < best_val - 1e-15:
            best, best_val = comb, v
    return set(best)


def random_feasible(rng, K, m, floor=1e-6):
    """Random interior point of the exact-m polytope via the Euclidean
    projection oracle, nudged away from the bounds."""
    y = rng.uniform(0.0, 1.0, size=K)
    a = euclid_capped(y * m / max(y.sum(), 1e-9), m)
    a = np.clip(a, floor, 1.0 - floor)
    # restore the sum exactly after the nudge
    a *= m / a.sum()
    return np.clip(a, floor, 1.0)
