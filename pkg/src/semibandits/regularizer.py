"""Separable convex potentials f with derivative, clamped inverse derivative,
and Lipschitz metadata.

Three choices are supported, all on [0, 1]:

  * ``NegShannon``   f(x) = x ln x - x   (continuously extended by f(0) = 0)
  * ``Quadratic``    f(x) = x^2
  * ``TsallisHalf``  f(x) = -sqrt(x)

The inverse derivative is clamped to [0, 1]; the clamp realizes the KKT
boundary cases of the capped-simplex subproblem and keeps the map globally
Lipschitz with the constants reported by ``lipschitz_constant``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FLOOR

NEG_SHANNON = "NegShannon"
QUADRATIC = "Quadratic"
TSALLIS_HALF = "TsallisHalf"

_KINDS = (NEG_SHANNON, QUADRATIC, TSALLIS_HALF)

_CLI_NAMES = {"shannon": NEG_SHANNON, "quadratic": QUADRATIC,
              "tsallis": TSALLIS_HALF}


class DomainError(ValueError):
    """Argument outside the potential's domain."""


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str
    floor: float = FLOOR
    lipschitz_L: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not self.floor > 0:
            raise ValueError("floor must be positive")


def neg_shannon() -> RegularizerSpec:
    return RegularizerSpec(NEG_SHANNON, FLOOR, 1.0)


def quadratic() -> RegularizerSpec:
    return RegularizerSpec(QUADRATIC, FLOOR, 0.5)


def tsallis_half() -> RegularizerSpec:
    return RegularizerSpec(TSALLIS_HALF, FLOOR, 4.0)


def from_name(name: str) -> RegularizerSpec:
    """Resolve a CLI name (shannon | quadratic | tsallis)."""
    try:
        kind = _CLI_NAMES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown regularizer name {name!r}") from None
    return {NEG_SHANNON: neg_shannon, QUADRATIC: quadratic,
            TSALLIS_HALF: tsallis_half}[kind]()


def f_value(reg: RegularizerSpec, x):
    """Potential value f(x) for x in [0, 1]."""
    arr = np.asarray(x, dtype=float)
    if (arr < 0).any() or (arr > 1).any():
        raise DomainError("f is defined on [0, 1]")
    if reg.kind == NEG_SHANNON:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(arr > 0, arr * np.log(np.maximum(arr, FLOOR)) - arr, 0.0)
    elif reg.kind == QUADRATIC:
        out = arr * arr
    else:
        out = -np.sqrt(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def f_prime(reg: RegularizerSpec, x):
    """Derivative f'(x); requires x >= floor for the singular potentials."""
    arr = np.asarray(x, dtype=float)
    if (arr > 1 + 1e-12).any() or (arr < 0).any():
        raise DomainError("f' is defined on [0, 1]")
    if reg.kind == QUADRATIC:
        out = 2.0 * arr
    else:
        if (arr < reg.floor).any():
            raise DomainError(f"f' undefined below floor {reg.floor:g}")
        if reg.kind == NEG_SHANNON:
            out = np.log(arr)
        else:
            out = -0.5 / np.sqrt(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def f_prime_inverse(reg: RegularizerSpec, z):
    """Clamped inverse of f': exact where it lands in [0, 1], else clipped.

    The clipped map is nondecreasing and globally Lipschitz with constant
    ``lipschitz_constant(reg)``.
    """
    arr = np.asarray(z, dtype=float)
    if reg.kind == NEG_SHANNON:
        out = np.where(arr >= 0.0, 1.0, np.exp(np.minimum(arr, 0.0)))
    elif reg.kind == QUADRATIC:
        out = np.clip(0.5 * arr, 0.0, 1.0)
    else:
        zc = np.minimum(arr, -0.5)
        out = np.where(arr >= -0.5, 1.0, 1.0 / (4.0 * zc * zc))
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def lipschitz_constant(reg: RegularizerSpec) -> float:
    return reg.lipschitz_L


def scalar_inverse(reg: RegularizerSpec):
    """Fast scalar closure for f_prime_inverse, for tight per-coordinate loops."""
    if reg.kind == NEG_SHANNON:
        exp = math.exp

        def inv(z: float) -> float:
            return 1.0 if z >= 0.0 else exp(z)
    elif reg.kind == QUADRATIC:
        def inv(z: float) -> float:
            if z <= 0.0:
                return 0.0
            h = 0.5 * z
            return 1.0 if h >= 1.0 else h
    else:
        def inv(z: float) -> float:
            return 1.0 if z >= -0.5 else 1.0 / (4.0 * z * z)
    return inv


def scalar_fprime(reg: RegularizerSpec):
    """Fast scalar closure for f_prime (domain-checked), for tight loops."""
    floor = reg.floor
    if reg.kind == NEG_SHANNON:
        log_ = math.log

        def fp(x: float) -> float:
            if x < floor:
                raise DomainError(f"f' undefined below floor {floor:g}")
            return log_(x)
    elif reg.kind == QUADRATIC:
        def fp(x: float) -> float:
            if x < 0.0:
                raise DomainError("f' is defined on [0, 1]")
            return 2.0 * x
    else:
        sqrt = math.sqrt

        def fp(x: float) -> float:
            if x < floor:
                raise DomainError(f"f' undefined below floor {floor:g}")
            return -0.5 / sqrt(x)
    return fp


def scalar_inverse_deriv(reg: RegularizerSpec):
    """Derivative of the clamped inverse (0 inside the clamped regions)."""
    if reg.kind == NEG_SHANNON:
        exp = math.exp

        def dinv(z: float) -> float:
            return 0.0 if z >= 0.0 else exp(z)
    elif reg.kind == QUADRATIC:
        def dinv(z: float) -> float:
            return 0.5 if 0.0 < z < 2.0 else 0.0
    else:
        def dinv(z: float) -> float:
            return 0.0 if z >= -0.5 else -0.5 / (z * z * z)
    return dinv
