import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rel, seeds
from qselberg import interp, jackson
from qselberg.errors import ConditionViolated, NotConverged, PoleHit
from qselberg.jackson import TruncationSpec
from qselberg.qcore import Params
from qselberg.verify import sample_integral_params


def integral_point(seed, n):
    rng = np.random.default_rng(seed)
    p = sample_integral_params(rng, n)
    return p, jackson.default_xi(p, rng)


def phi_mp(p, z):
    """Phi without its power factors, from mpmath infinite products."""
    q, t = mpmath.mpc(p.q), mpmath.mpc(p.t)
    a1, a2, b1, b2 = (mpmath.mpc(v) for v in (p.a1, p.a2, p.b1, p.b2))
    z = [mpmath.mpc(v) for v in z]
    out = mpmath.mpc(1)
    for zi in z:
        out *= mpmath.qp(q * zi / a1, q) * mpmath.qp(q * zi / a2, q) / (mpmath.qp(b1 * zi, q) * mpmath.qp(b2 * zi, q))
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            out *= mpmath.qp(q / t * z[j] / z[i], q) / mpmath.qp(t * z[j] / z[i], q)
    return out


def ratio_mp(p, xi, nu):
    n = len(xi)
    pre = mpmath.mpc(p.qalpha) ** sum(nu)
    for i in range(n):
        pre *= (mpmath.mpc(p.t) ** 2 / mpmath.mpc(p.q)) ** (nu[i] * (n - 1 - i))
    z = [xi[i] * p.q ** nu[i] for i in range(n)]
    return pre * phi_mp(p, z) / phi_mp(p, xi)


def test_convergence_condition():
    base = dict(q=0.3, t=0.9, a1=1.1, a2=0.9, b1=1.2, b2=0.8, n=2)
    assert jackson.check_convergence(Params(qalpha=0.5, **base))
    assert not jackson.check_convergence(Params(qalpha=1.0, **base))
    assert not jackson.check_convergence(Params(qalpha=0.5, **dict(base, t=1.5)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_weight_ratio_against_infinite_products(n):
    p, xi = integral_point(n, n)
    rng = np.random.default_rng(n)
    for _ in range(5):
        nu = rng.integers(-6, 7, size=n)
        w = jackson.weight_ratio(p, xi, nu[None, :])[0]
        with mpmath.workdps(35):
            assert rel(complex(w), complex(ratio_mp(p, xi, [int(v) for v in nu]))) < 1e-12


@given(seeds, st.integers(1, 3), st.data())
def test_weight_ratio_cocycle(seed, n, data):
    p, xi = integral_point(seed, n)
    nu = np.array([data.draw(st.integers(-5, 5)) for _ in range(n)])
    mu = np.array([data.draw(st.integers(-5, 5)) for _ in range(n)])
    shifted = tuple(np.asarray(xi) * p.q ** nu)
    lhs = jackson.weight_ratio(p, xi, (nu + mu)[None, :])[0]
    rhs = jackson.weight_ratio(p, xi, nu[None, :])[0] * jackson.weight_ratio(p, shifted, mu[None, :])[0]
    assert rel(lhs, rhs) < 1e-10


def test_unit_shift_is_one_step_factor():
    p, xi = integral_point(4, 2)
    assert jackson.weight_ratio(p, xi, np.zeros((1, 2), int))[0] == 1
    e1 = np.array([[1, 0]])
    assert rel(jackson.weight_ratio(p, xi, e1)[0], jackson.one_step_factor(p, xi)) < 1e-13


def test_zero_integrand_and_radius_stability():
    p, xi = integral_point(5, 1)
    spec = jackson.make_bracket("matsuo[0](a1,b2)", p, xi)
    zero = jackson.bracket(spec, TruncationSpec(N=20), func=lambda pe, Z: np.zeros(Z.shape[:-1], complex))
    assert zero.value == 0
    v60 = jackson.bracket(spec, TruncationSpec(N=60)).value
    v120 = jackson.bracket(spec, TruncationSpec(N=120)).value
    assert rel(v60, v120) < 1e-8


@pytest.mark.parametrize("n", [1, 2])
def test_base_point_q_shift_invariance(n):
    """Moving xi_1 to q xi_1 only rescales the normalised bracket by Phi(q xi)/Phi(xi)."""
    p, xi = integral_point(6, n)
    N = 60 if n == 1 else 40
    qxi = (xi[0] * p.q,) + tuple(xi[1:])
    b1 = jackson.bracket(jackson.make_bracket("matsuo[1](a1,b2)", p, xi), TruncationSpec(N=N)).value
    b2 = jackson.bracket(jackson.make_bracket("matsuo[1](a1,b2)", p, qxi), TruncationSpec(N=N)).value
    ratio = jackson.weight_ratio(p, xi, np.eye(n, dtype=int)[:1])[0]
    assert rel(b1, ratio * b2) < 1e-8


@pytest.mark.parametrize("n", [1, 2])
def test_alpha_shift_is_top_etilde(n):
    p, xi = integral_point(7, n)
    tr = TruncationSpec.for_n(n)
    for i in range(n + 1):
        shifted = jackson.bracket(jackson.apply_T_alpha(jackson.make_bracket(f"matsuo[{i}](a1,b2)", p, xi)), tr)
        top = jackson.bracket(jackson.make_bracket(f"etilde[{n},{i}](a1,b2)", p, xi), tr)
        assert rel(shifted.value, top.value) < 1e-12


def test_shift_operators_compose():
    p, xi = integral_point(8, 1)
    s = jackson.make_bracket("matsuo[1](a2,b1)", p, xi)
    assert jackson.apply_T_alpha(jackson.apply_T_alpha(s)) == jackson.apply_T_alpha(s, 2)
    assert jackson.apply_T_ab(jackson.apply_T_ab(s, 1), 2) == jackson.apply_T_ab(jackson.apply_T_ab(s, 2), 1)
    eff = jackson.apply_T_ab(s, 2).effective_params()
    assert eff.a2 * eff.b2 == pytest.approx(p.a2 * p.b2)


def test_manual_sum_n1():
    """Direct lattice sum with mpmath weights, Matsuo polynomial evaluated pointwise."""
    p, xi = integral_point(9, 1)
    N = 25
    got = jackson.bracket(jackson.make_bracket("matsuo[1](a1,b2)", p, xi), TruncationSpec(N=N), check_tail=False)
    total = 0
    with mpmath.workdps(30):
        for m in range(-N, N + 1):
            z = xi[0] * p.q ** m
            total += complex(ratio_mp(p, xi, [m])) * interp.matsuo(1, p.a1, p.b2, p.t, np.array([z]))
    assert rel(got.value, (1 - p.q) * total) < 1e-11


def test_errors():
    p, xi = integral_point(10, 1)
    with pytest.raises(NotConverged):
        jackson.bracket(jackson.make_bracket("matsuo[0](a1,b2)", p, xi), TruncationSpec(N=3))
    with pytest.raises(PoleHit):
        jackson.bracket(jackson.make_bracket("matsuo[0](a1,b2)", p, (p.a1,)), TruncationSpec(N=20))
    bad = p.with_(qalpha=1.2)
    with pytest.raises(ConditionViolated):
        jackson.bracket(jackson.make_bracket("matsuo[0](a1,b2)", bad, xi))
    with pytest.raises(ValueError):
        TruncationSpec(N=0)


def test_bracket_json():
    p, xi = integral_point(11, 1)
    out = jackson.bracket(jackson.make_bracket("matsuo[0](a1,b2)", p, xi)).to_json()
    assert out["gauge"] == "phi_at_xi_normalized"
    assert set(out) >= {"value", "N", "shells_used", "tail_estimate"}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_FG_closed_forms(n):
    rng = np.random.default_rng(n)
    p = sample_integral_params(rng, n)
    x, y = 0.7 + 0.2j, -0.3 + 0.8j
    for name, (fg, idx, kind) in jackson.FG_FORMS.items():
        js = range(1, n + 1) if name in ("F1_xb", "F1_ay", "Gj_ay") else range(0, n)
        for j in js:
            z = jackson.zeta_point(p, j, x, 1 / p.b2) if kind == "xb" else jackson.zeta_point(p, j, p.a1, y)
            assert rel(jackson.FG_eval(p, fg, idx(n, j), z), jackson.FG_closed_form(p, name, j, x=x, y=y)) < 1e-10


def test_nabla_closed_form_matches_definition():
    p, _ = integral_point(12, 2)
    z = np.array([0.4 + 0.3j, -0.6 + 0.1j])
    for k, i in ((1, 0), (2, 1)):
        phi = lambda w, k=k, i=i: jackson.phi_ki(p, k, i, w)  # noqa: E731
        assert rel(jackson.nabla_integrand(p, phi, z), jackson.nabla_phi_ki(p, k, i, z)) < 1e-12
