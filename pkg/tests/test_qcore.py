import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import nonzero_complex, rel
from qselberg.errors import DivisionByZero, NonConvergent
from qselberg.qcore import (Params, carray, check_generic, cnum, infinite_product, qbinom, qpoch, random_params,
                            sample_generic, working_precision)


def brute(x, c, i):
    out = 1
    for k in range(i):
        out *= 1 - c ** k * x
    return out


def test_shifted_factorial_small_cases():
    assert qpoch(0.7, 0.3, 0) == 1
    assert qpoch(0.7, 0.3, 1) == pytest.approx(0.3)
    assert qpoch(0.7, 0.3, 3) == pytest.approx((1 - 0.7) * (1 - 0.21) * (1 - 0.063), rel=1e-15)


def test_negative_index_is_reciprocal():
    x, c = 0.7 + 0.2j, 0.3 - 0.1j
    assert qpoch(x, c, -1) * (1 - x / c) == pytest.approx(1)
    assert qpoch(x, c, -3) == pytest.approx(1 / brute(x / c ** 3, c, 3))


def test_negative_index_zero_factor_raises():
    with pytest.raises(DivisionByZero):
        qpoch(0.5, 0.5, -2)  # factor 1 - x/c vanishes


def test_against_mpmath_qp():
    x, c = 0.4 + 0.3j, 0.6 - 0.2j
    for i in range(8):
        assert rel(complex(qpoch(x, c, i)), complex(mpmath.qp(x, c, i))) < 1e-13


@given(nonzero_complex(0.1, 1.5), nonzero_complex(0.2, 0.95), st.integers(-6, 6), st.integers(-6, 6))
def test_split_rule(x, c, i, j):
    try:
        lhs = qpoch(x, c, i + j)
        rhs = qpoch(x, c, i) * qpoch(c ** i * x, c, j)
    except DivisionByZero:
        return
    assert rel(lhs, rhs) < 1e-11


def test_qbinom_values():
    assert qbinom(5, 0, 0.3) == 1
    assert qbinom(3, 1, 0.4) == pytest.approx(1 + 0.4 + 0.16)
    assert qbinom(3, 4, 0.4) == 0 and qbinom(3, -1, 0.4) == 0


@given(st.integers(0, 10), st.integers(0, 10), nonzero_complex(0.2, 0.9))
def test_qbinom_symmetry_and_pascal(i, j, c):
    assert rel(qbinom(i, j, c), qbinom(i, i - j, c)) < 1e-12 or j > i
    if i >= 1:
        pascal = qbinom(i - 1, j - 1, c) + c ** j * qbinom(i - 1, j, c)
        assert abs(qbinom(i, j, c) - pascal) <= 1e-11 * max(1, abs(pascal))


def test_qbinom_matches_definition():
    c = 0.35 + 0.2j
    for i in range(7):
        for j in range(i + 1):
            d = brute(c, c, i) / (brute(c, c, i - j) * brute(c, c, j))
            assert rel(qbinom(i, j, c), d) < 1e-13


def test_infinite_product():
    assert infinite_product(0, 0.5) == 1
    assert infinite_product(0.5, 0.5) == pytest.approx(brute(0.5, 0.5, 60), rel=1e-15)
    x, c = 0.8 - 0.3j, 0.7 + 0.1j
    assert rel(infinite_product(x, c), (1 - x) * infinite_product(c * x, c)) < 1e-14
    assert rel(complex(infinite_product(x, c)), complex(mpmath.qp(x, c))) < 1e-13
    with pytest.raises(NonConvergent):
        infinite_product(0.5, 1.0)


@given(nonzero_complex(0.05, 2.0), nonzero_complex(0.05, 0.9))
def test_infinite_product_tail_tolerance(x, c):
    a = infinite_product(x, c, tail_tol=1e-12)
    b = infinite_product(x, c, tail_tol=1e-16)
    assert rel(a, b) < 1e-11


def test_params_validation_and_json_roundtrip():
    p = random_params(np.random.default_rng(0), 3)
    assert Params.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        Params(q=1.2, t=0.5, qalpha=0.5, a1=1, a2=1, b1=1, b2=1)
    with pytest.raises(ValueError):
        Params(q=0.3, t=0, qalpha=0.5, a1=1, a2=1, b1=1, b2=1)
    with pytest.raises(ValueError):
        Params(q=0.3, t=float("nan"), qalpha=0.5, a1=1, a2=1, b1=1, b2=1)


def test_exponent_form_converts_to_powers():
    p = Params.from_json({"q": 0.25, "tau": 0.5, "alpha": 2.0, "a1": 1.5, "a2": 2.5, "b1": 0.7, "b2": 0.9, "n": 2})
    assert p.t == pytest.approx(0.5) and p.qalpha == pytest.approx(0.0625)


def test_shifts():
    p = random_params(np.random.default_rng(1), 2)
    s = p.shift_ab(2)
    assert s.a2 * s.b2 == pytest.approx(p.a2 * p.b2)
    assert p.shift_alpha().qalpha == pytest.approx(p.q * p.qalpha)
    assert p.swapped().swapped() == p


def test_generic_draw_passes():
    p = sample_generic(np.random.default_rng(2), 4)
    assert check_generic(p).passed


def test_coincident_a_fails_genericity():
    p = random_params(np.random.default_rng(3), 3)
    v = check_generic(p.with_(a2=p.a1))
    assert not v.passed
    assert "R" in v.offending


@pytest.mark.parametrize("k", [1, 2, 3])
def test_qalpha_on_t_power_fails_genericity(k):
    p = random_params(np.random.default_rng(4), 3)
    v = check_generic(p.with_(qalpha=p.t ** (k - 3)))
    assert not v.passed


def test_working_precision_switches_number_type():
    assert type(cnum(0.5)) is complex
    with working_precision(120):
        z = cnum(0.5)
        assert isinstance(z, mpmath.mpc)
        assert mpmath.mp.prec == 120
        assert carray([1, 2]).dtype == object
    assert mpmath.mp.prec == 53
    # more bits shrinks rounding error in a cancellation-prone product
    with working_precision(200):
        val = qpoch(1 - mpmath.mpf(2) ** -60, 1, 1)
    assert math.isclose(float(val.real), 2.0 ** -60, rel_tol=1e-30)
