import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import generic, rel, seeds
from qselberg import gauss, verify
from qselberg.errors import Degenerate, IndexOutOfRange, NonGeneric
from qselberg.gauss import ClassicalParams
from qselberg.qcore import random_params, working_precision


def max_rel(X, Y, S):
    return float(np.max(np.abs(X - Y) / np.maximum(S, 1e-300)))


@pytest.mark.parametrize("build", [gauss.build_R_factors, gauss.build_A_factors, gauss.build_R_inverse])
@pytest.mark.parametrize("order", ["LDU", "UDL"])
def test_factor_shapes(build, order):
    F = build(generic(1, 4), order)
    assert np.allclose(np.diag(F.lower), 1) and np.allclose(np.diag(F.upper), 1)
    assert np.all(np.triu(F.lower, 1) == 0) and np.all(np.tril(F.upper, -1) == 0)
    assert np.all(F.diag - np.diag(np.diag(F.diag)) == 0)


@given(seeds, st.integers(1, 8))
def test_R_and_A_decompositions_agree(seed, n):
    p = generic(seed, n)
    for build in (gauss.build_R_factors, gauss.build_A_factors):
        F1, F2 = build(p, "LDU"), build(p, "UDL")
        S = np.maximum(verify.chain_scale(F1.lower, F1.diag, F1.upper), verify.chain_scale(F2.upper, F2.diag, F2.lower))
        assert max_rel(F1.product(), F2.product(), S) < 1e-10


@given(seeds, st.integers(1, 4))
def test_R_factored_equals_direct(seed, n):
    p = generic(seed, n)
    R = gauss.build_R_factors(p).product()
    assert np.max(np.abs(R - gauss.build_R_direct(p))) <= 1e-9 * np.max(np.abs(R))


def test_R_direct_n1():
    p = generic(21, 1)
    assert np.allclose(gauss.build_R_direct(p), gauss.build_R_factors(p).product(), rtol=1e-12, atol=0)


@given(seeds, st.integers(1, 8))
def test_R_inverse(seed, n):
    p = generic(seed, n)
    F = gauss.build_R_factors(p)
    for order in ("LDU", "UDL"):
        chain = verify.factor_chain(F) + verify.factor_chain(gauss.build_R_inverse(p, order))
        prod = chain[0]
        for m in chain[1:]:
            prod = prod @ m
        assert max_rel(prod, np.eye(n + 1), np.maximum(verify.chain_scale(*chain), 1)) < 1e-10


def test_R_inverse_swap_rule():
    """Lower factor of R^-1 equals the reversed upper factor of R at swapped pairs."""
    p = generic(4, 4)
    n = 4
    L_star = gauss.build_R_inverse(p, "UDL").lower
    U_bar = gauss.build_R_factors(p.swapped(), "LDU").upper
    for i in range(n + 1):
        for j in range(n + 1):
            assert L_star[i, j] == pytest.approx(U_bar[n - i, n - j], rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("n", [0, 1, 3, 6])
def test_det_R_times_det_inverse(n):
    p = generic(8, n) if n else generic(8, 1).with_(n=0)
    dR = gauss.det_formula(p, "R")
    assert rel(dR, gauss.build_R_factors(p).det()) < 1e-12
    assert rel(dR * gauss.build_R_inverse(p).det(), 1) < 1e-10
    if n == 0:
        assert rel(dR, gauss.build_R_factors(p).diag[0, 0]) < 1e-15


@pytest.mark.parametrize("which", ["R", "K1", "K2", "A"])
@pytest.mark.parametrize("n", [2, 5, 8])
def test_determinant_formulas_against_elimination(which, n):
    p = generic(30 + n, n)
    with working_precision(160):
        m = {"R": lambda: gauss.build_R_factors(p).product(), "A": lambda: gauss.build_A_factors(p).product(),
             "K1": lambda: gauss.build_K(p, 1), "K2": lambda: gauss.build_K(p, 2)}[which]()
        assert rel(gauss.det_formula(p, which), gauss.det_elimination(m)) < 1e-30


def test_det_elimination_small():
    m = np.array([[0, 2], [3, 4]], dtype=complex)
    assert gauss.det_elimination(m) == pytest.approx(-6)
    assert gauss.det_elimination(np.array([[2.0, 1.0], [4.0, 2.0]])) == 0


@given(seeds, st.integers(1, 6))
def test_intermediate_products(seed, n):
    p = generic(seed, n)
    B = lambda w: gauss.build_intermediate(p, w)  # noqa: E731
    FA, FR = gauss.build_A_factors(p), gauss.build_R_factors(p)
    A, R = FA.product(), FR.product()
    SA, SR = verify.chain_scale(*verify.factor_chain(FA)), verify.chain_scale(*verify.factor_chain(FR))
    for X, Y, T, ST in ((B("Ltilde"), B("Utilde"), A, SA), (B("UtildePrime_app"), B("LtildePrime_app"), A, SA),
                        (B("Ltilde_R"), B("Utilde_R"), R, SR), (B("UtildePrime_R"), B("LtildePrime_R"), R, SR)):
        assert max_rel(X @ Y, T, np.maximum(verify.chain_scale(X, Y), ST)) < 1e-10
    I = np.eye(n + 1)
    for X, Y in ((gauss.build_A_factors(p, "LDU").upper, B("UAinv")),
                 (gauss.build_A_factors(p, "UDL").lower, B("LprimeAinv")), (B("Utilde"), B("Vtilde"))):
        assert max_rel(X @ Y, I, np.maximum(verify.chain_scale(X, Y), 1)) < 1e-10


@pytest.mark.parametrize("which,k,i", [("L", 1, 1), ("U", 2, 2), ("V", 1, 2), ("Uprime_app", 1, 2),
                                        ("Lprime_app", 2, 1)])
def test_corollary_coefficients_trivial_step(which, k, i):
    p = generic(2, 3)
    assert gauss.corollary42_coeff(p, which, k, i, 0, 0) == pytest.approx(1)


def test_corollary_coefficients_give_ltilde():
    p = generic(6, 4)
    n = 4
    Lt = gauss.build_intermediate(p, "Ltilde")
    for i in range(n + 1):
        for j in range(i + 1):
            l = n - j
            assert rel(gauss.corollary42_coeff(p, "L", n - j, j, l, i - j), Lt[i, j]) < 1e-12


@given(seeds, st.integers(1, 4), st.sampled_from(["L", "U", "V", "Uprime_app", "Lprime_app"]), st.data())
def test_corollary_coefficients_match_recursion(seed, n, which, data):
    """Closed-form multi-step coefficients against repeated one-step expansion."""
    p = generic(seed, n)
    k, i, l = (data.draw(st.integers(0, n)) for _ in range(3))
    j = data.draw(st.integers(0, l))
    try:
        c = gauss.corollary42_coeff(p, which, k, i, l, j)
    except IndexOutOfRange:
        return
    r = gauss.corollary42_coeff_by_recursion(p, which, k, i, l, j)
    assert abs(c - r) <= 1e-10 * max(1.0, abs(r))


def test_corollary_index_guard():
    with pytest.raises(IndexOutOfRange):
        gauss.corollary42_coeff(generic(1, 2), "L", 1, 0, 2, 0)


def test_non_generic_raises():
    p = random_params(np.random.default_rng(0), 2)
    with pytest.raises(NonGeneric) as err:
        gauss.require_generic(p.with_(a2=p.a1))
    assert err.value.verdict is not None and not err.value.verdict.passed


def classical_n1(al, be, ga, x):
    """The two n = 1 product forms of the classical matrix."""
    Ma = np.array([[al + ga, 0], [-x * ga, x * al]]) @ np.linalg.inv([[al + be + ga, be], [0, al + ga]])
    Mb = np.array([[al, -be], [0, x * (al + be)]]) @ np.linalg.inv([[al + be, 0], [ga, al + be + ga]])
    return Ma, Mb


@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(1.2, 5))
def test_classical_M_n1(al, be, ga, x):
    cp = ClassicalParams(al, be, ga, 1.0, x, 1)
    Ma, Mb = classical_n1(al, be, ga, x)
    for order in ("LDU", "UDL"):
        M = gauss.build_classical_M(cp, order).product()
        assert np.allclose(M, Ma, rtol=1e-12, atol=1e-12 * np.abs(Ma).max())
        assert np.allclose(M, Mb, rtol=1e-12, atol=1e-12 * np.abs(Mb).max())


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 2), st.floats(0.3, 5),
       st.integers(1, 8))
def test_classical_M_decompositions_agree(al, be, ga, tau, x, n):
    cp = ClassicalParams(al, be, ga, tau, x, n)
    F1, F2 = gauss.build_classical_M(cp, "LDU"), gauss.build_classical_M(cp, "UDL")
    S = np.maximum(verify.chain_scale(F1.lower, F1.diag, F1.upper), verify.chain_scale(F2.upper, F2.diag, F2.lower))
    assert max_rel(F1.product(), F2.product(), S) < 1e-10
    assert rel(gauss.det_formula(cp, "M"), np.linalg.det(F1.product().astype(complex))) < 1e-8


def test_classical_degenerate():
    with pytest.raises(Degenerate):
        gauss.build_classical_M(ClassicalParams(1.0, 1.0, -1.0, 1.0, 2.0, 2)).product()


def test_matrix_json():
    p = generic(3, 2)
    out = gauss.build_A_factors(p, "UDL").to_json(p)
    assert out["order"] == "UDL" and out["n"] == 2
    assert len(out["product"]) == 3 and len(out["product"][0][0]) == 2
