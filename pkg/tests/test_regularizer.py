import math

import numpy as np
import pytest

from semibandits.regularizer import (DomainError, f_prime, f_prime_inverse,
                                     f_value, from_name, lipschitz_constant,
                                     neg_shannon, quadratic, scalar_fprime,
                                     scalar_inverse, scalar_inverse_deriv,
                                     tsallis_half)

ALL = [neg_shannon(), quadratic(), tsallis_half()]


def test_cli_names():
    assert from_name("shannon").kind == "NegShannon"
    assert from_name("quadratic").kind == "Quadratic"
    assert from_name("tsallis").kind == "TsallisHalf"
    with pytest.raises(ValueError):
        from_name("gibbs")


def test_f_value_examples():
    assert f_value(neg_shannon(), 1.0) == pytest.approx(-1.0)
    assert f_value(quadratic(), 0.5) == pytest.approx(0.25)
    assert f_value(tsallis_half(), 0.25) == pytest.approx(-0.5)
    assert f_value(neg_shannon(), 0.0) == 0.0  # continuous extension
    with pytest.raises(DomainError):
        f_value(quadratic(), 1.5)
    with pytest.raises(DomainError):
        f_value(neg_shannon(), -0.1)


def test_f_prime_examples():
    assert f_prime(neg_shannon(), 1.0) == pytest.approx(0.0)
    assert f_prime(quadratic(), 1.0) == pytest.approx(2.0)
    assert f_prime(tsallis_half(), 0.25) == pytest.approx(-1.0)
    for reg in (neg_shannon(), tsallis_half()):
        with pytest.raises(DomainError):
            f_prime(reg, reg.floor / 10)


def test_f_prime_inverse_examples():
    assert f_prime_inverse(neg_shannon(), 0.0) == pytest.approx(1.0)
    assert f_prime_inverse(quadratic(), 1.0) == pytest.approx(0.5)
    assert f_prime_inverse(tsallis_half(), -0.5) == pytest.approx(1.0)
    assert f_prime_inverse(neg_shannon(), 3.0) == 1.0     # upper clamp
    assert f_prime_inverse(quadratic(), -2.0) == 0.0      # lower clamp
    assert f_prime_inverse(tsallis_half(), 5.0) == 1.0


def test_lipschitz_constants():
    assert lipschitz_constant(neg_shannon()) == 1.0
    assert lipschitz_constant(quadratic()) == 0.5
    assert lipschitz_constant(tsallis_half()) == 4.0


@pytest.mark.parametrize("reg", ALL, ids=lambda r: r.kind)
def test_roundtrip_on_grid(reg):
    xs = np.linspace(reg.floor, 1.0, 1000)
    back = f_prime_inverse(reg, f_prime(reg, xs))
    assert np.abs(back - xs).max() <= 1e-12


@pytest.mark.parametrize("reg", ALL, ids=lambda r: r.kind)
def test_monotonicity(reg):
    xs = np.linspace(reg.floor, 1.0, 500)
    fp = f_prime(reg, xs)
    assert (np.diff(fp) > 0).all()
    rng = np.random.default_rng(0)
    zs = np.sort(rng.uniform(-50.0, 50.0, size=2000))
    inv = f_prime_inverse(reg, zs)
    assert (np.diff(inv) >= -1e-15).all()


@pytest.mark.parametrize("reg", ALL, ids=lambda r: r.kind)
def test_lipschitz_bound_on_working_range(reg):
    rng = np.random.default_rng(1)
    if reg.kind == "TsallisHalf":
        z1 = rng.uniform(-40.0, -0.5, size=10_000)
        z2 = rng.uniform(-40.0, -0.5, size=10_000)
    else:
        z1 = rng.uniform(-40.0, 5.0, size=10_000)
        z2 = rng.uniform(-40.0, 5.0, size=10_000)
    L = lipschitz_constant(reg)
    gap = np.abs(f_prime_inverse(reg, z1) - f_prime_inverse(reg, z2))
    assert (gap <= L * np.abs(z1 - z2) + 1e-12).all()


@pytest.mark.parametrize("reg", ALL, ids=lambda r: r.kind)
def test_scalar_paths_match_array_paths(reg):
    rng = np.random.default_rng(2)
    zs = rng.uniform(-30.0, 3.0, size=300)
    inv = scalar_inverse(reg)
    # math.exp and np.exp may differ in the last ulp
    assert np.allclose([inv(z) for z in zs], f_prime_inverse(reg, zs),
                       rtol=1e-15, atol=0)
    xs = rng.uniform(reg.floor, 1.0, size=300)
    fp = scalar_fprime(reg)
    got = np.array([fp(x) for x in xs])
    assert np.allclose(got, f_prime(reg, xs), rtol=0, atol=0)


@pytest.mark.parametrize("reg", ALL, ids=lambda r: r.kind)
def test_inverse_derivative_consistent(reg):
    dinv = scalar_inverse_deriv(reg)
    inv = scalar_inverse(reg)
    rng = np.random.default_rng(3)
    for z in rng.uniform(-10.0, 2.0, size=200):
        h = 1e-7
        fd = (inv(z + h) - inv(z - h)) / (2 * h)
        # skip the clamp kinks where the derivative jumps
        if reg.kind == "NegShannon" and abs(z) < 1e-5:
            continue
        if reg.kind == "Quadratic" and (abs(z) < 1e-5 or abs(z - 2) < 1e-5):
            continue
        if reg.kind == "TsallisHalf" and abs(z + 0.5) < 1e-5:
            continue
        assert dinv(z) == pytest.approx(fd, abs=1e-5)
