from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from quasilinear_mp.exceptions import DomainError
from quasilinear_mp.nonlinearity import NonlinearitySpec

MP = NonlinearitySpec.min_power(5, 7)
RP = NonlinearitySpec.ratio_power(5, 7)
SP = NonlinearitySpec.single_power(8)


def test_min_power_values():
    assert MP.g(1.0) == 1.0
    assert MP.g(0.5) == pytest.approx(0.5 ** 6)
    assert MP.g(2.0) == pytest.approx(2.0 ** 4)
    assert MP.G(0.0) == 0.0
    assert MP.G(1.0) == pytest.approx(1 / 7)
    assert MP.G(2.0) == pytest.approx(1 / 7 + (2 ** 5 - 1) / 5)


@pytest.mark.parametrize("spec", [MP, RP, SP])
def test_truncation(spec):
    assert spec.g(-3.0) == 0.0
    assert spec.G(-3.0) == 0.0
    assert spec.g_prime(-3.0) == 0.0


def test_odd_extension():
    odd = NonlinearitySpec.single_power(6, truncated_negative=False)
    assert odd.g(-2.0) == -odd.g(2.0)
    assert odd.G(-2.0) == odd.G(2.0)


@pytest.mark.parametrize("t", [1e-5, 0.3, 1.0, 2.5, 40.0, 3e3])
def test_ratio_power_primitive_against_quad(t):
    exact, _ = integrate.quad(lambda s: s ** 6 / (1 + s ** 2), 0, t, epsrel=1e-13, limit=200)
    assert RP.G(t) == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("spec", [MP, RP, SP])
def test_g_prime_matches_difference(spec):
    t = np.array([0.2, 0.7, 1.6, 5.0])
    eps = 1e-6
    fd = (spec.g(t + eps) - spec.g(t - eps)) / (2 * eps)
    assert np.allclose(spec.g_prime(t), fd, rtol=1e-6)


@pytest.mark.parametrize("spec", [MP, RP, SP])
def test_G_derivative_is_g(spec):
    t = np.array([0.3, 0.9, 1.1, 3.0])
    eps = 1e-6
    fd = (spec.G(t + eps) - spec.G(t - eps)) / (2 * eps)
    assert np.allclose(fd, spec.g(t), rtol=1e-6)


def test_zero_kind():
    z = NonlinearitySpec.zero()
    assert z.g(3.0) == 0.0 and z.G(3.0) == 0.0
    assert z.to_dict()["kind"] == "zero"


def test_validation():
    with pytest.raises(DomainError):
        NonlinearitySpec("cubic", 5, 5)
    with pytest.raises(DomainError):
        NonlinearitySpec.single_power(4)  # theta = 2 is not > 2
    with pytest.raises(DomainError):
        NonlinearitySpec.min_power(6, 8, theta=Fr(7, 2))  # 2 theta > q1
    loose = NonlinearitySpec.single_power(3, strict=False)
    assert loose.q1 == 3
    swapped = NonlinearitySpec.min_power(9, 5)
    assert (swapped.q1, swapped.q2) == (5, 9) and swapped.notes


@pytest.mark.parametrize("spec", [MP, RP, SP])
def test_ambrosetti_rabinowitz_margin(spec):
    t = np.geomspace(1e-4, 1e4, 400)
    margin, gmin = spec.g1_margin(t)
    assert margin >= -1e-12 and gmin >= 0
    assert spec.growth_constant(t) <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0, max_value=1e3), st.floats(min_value=0, max_value=1e3))
def test_G_monotone(a, b):
    for spec in (MP, RP, SP):
        if a <= b:
            assert spec.G(a) <= spec.G(b) * (1 + 1e-12)
