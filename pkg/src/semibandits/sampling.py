"""Decomposition of a mean action into polytope vertices and action sampling.

A feasible point of the capped simplex is written as a convex combination of
at most K exact-m indicator vectors by greedy vertex peeling; actions are
then drawn atom-wise, optionally mixed with a uniform exploration set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ActionVector, InvariantError


class InfeasibleError(InvariantError):
    """Input point violates the mean-action invariants beyond tolerance."""


@dataclass(frozen=True)
class Decomposition:
    """Sparse distribution over vertices with the source point as its mean."""

    atoms: tuple

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def mean(self) -> np.ndarray:
        out = np.zeros(self.atoms[0][0].K)
        for v, w in self.atoms:
            out += w * v.bits
        return out


def decompose(abar, m: int, tol: float = 1e-9) -> Decomposition:
    """Greedy vertex peeling of a feasible exact-m point.

    Sorts coordinates descending (ties by index), repeatedly takes the
    vertex on the current top-m coordinates and subtracts the largest weight
    that keeps the residual inside the shrunken polytope.  The fractional
    support strictly shrinks, so at most K atoms are produced.
    """
    r = np.asarray(abar, dtype=float).copy()
    K = r.shape[0]
    if (r < -tol).any() or (r > 1.0 + tol).any() or abs(r.sum() - m) > tol:
        raise InfeasibleError("point outside the exact-m polytope")
    np.clip(r, 0.0, 1.0, out=r)
    rho = 1.0
    snap = 1e-13
    dust = 1e-10     # residual mass small enough to drop outright
    atoms = []
    for _ in range(K + 2):
        if rho <= dust:
            break
        order = np.argsort(-r, kind="stable")
        top = order[:m]
        alpha = float(min(r[top].min(), rho))
        if K > m:
            alpha = min(alpha, rho - float(r[order[m:]].max()))
        if alpha <= 0.0:
            if rho <= 1e-9:
                break
            raise InfeasibleError("peeling stalled; residual inconsistent")
        atoms.append((ActionVector.from_indices(K, top), alpha))
        r[top] -= alpha
        rho -= alpha
        r[r < snap] = 0.0
        r[r > rho - snap] = rho
    else:
        raise InfeasibleError("peeling did not terminate within K atoms")
    total = sum(w for _, w in atoms)
    atoms = tuple((v, w / total) for v, w in atoms)
    return Decomposition(atoms)


def sample_action(decomp: Decomposition, rng: np.random.Generator) -> ActionVector:
    """Draw one vertex with probability proportional to its weight."""
    w = decomp.weights()
    idx = rng.choice(len(w), p=w / w.sum())
    return decomp.atoms[idx][0]


def mix_exploration(decomp: Decomposition, gamma: float,
                    exploration_set, rng: np.random.Generator) -> ActionVector:
    """With probability gamma return a uniform exploration action, else sample.

    The engines keep gamma <= 1/2; larger values are allowed here for tests.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma > 0.0 and rng.random() < gamma:
        return exploration_set[rng.integers(len(exploration_set))]
    return sample_action(decomp, rng)


def build_exploration_set(K: int, m: int, n_slack: int = 0) -> list:
    """Exploration actions covering every base arm.

    With slack arms present (an embedded at-most-m instance) each real arm's
    singleton is padded with slack arms up to cardinality m.  On a native
    exact-m instance the cyclic m-sets {k, .., k+m-1 mod K} are used, which
    cover each arm m times.  Either way |E| equals the number of real arms.
    """
    if n_slack > 0:
        if n_slack < m - 1:
            raise ValueError("need at least m-1 slack arms to pad singletons")
        pad = list(range(K - n_slack, K - n_slack + m - 1))
        return [ActionVector.from_indices(K, [k] + pad)
                for k in range(K - n_slack)]
    return [ActionVector.from_indices(K, [(k + j) % K for j in range(m)])
            for k in range(K)]
