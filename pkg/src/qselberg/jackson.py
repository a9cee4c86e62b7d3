"""Truncated Jackson integrals over the lattice xi q^nu, nu in Z^n.

All brackets live in the gauge Phi(xi) = 1: the weight at a lattice point is
the ratio Phi(xi q^nu)/Phi(xi), built from finite shifted factorials and
integer powers only, so no complex power is ever taken.  Every identity that
is checked is linear in brackets sharing the same xi and parameters, so the
gauge constant cancels.

Shifts of alpha and of the pairs (a_r, b_r) are realised as rational
multipliers of the integrand; the polynomial itself is evaluated at the
shifted parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import interp
from .errors import ConditionViolated, NotConverged, PoleHit
from .interp import PolySpec, parse_polyspec
from .qcore import Params, carray, cnum, exact_sum, to_pair, working_precision

DEFAULT_RADIUS = {1: 60, 2: 40, 3: 24}
POLE_TOL = 1e-13


@dataclass(frozen=True)
class TruncationSpec:
    N: int = 60
    tail_tol: float = 1e-8
    precision_bits: int = 53
    deterministic: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("lattice radius N must be at least 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")

    @classmethod
    def for_n(cls, n: int, **kw) -> "TruncationSpec":
        return cls(N=DEFAULT_RADIUS.get(n, 16), **kw)


@dataclass(frozen=True)
class BracketSpec:
    """<poly, xi> at ``params`` after ``alpha_shift`` alpha-shifts and
    ``ab_shift[r-1]`` applications of a_r -> q a_r, b_r -> b_r / q."""

    poly: PolySpec
    xi: tuple
    params: Params
    alpha_shift: int = 0
    ab_shift: tuple = (0, 0)

    def effective_params(self) -> Params:
        p = self.params.shift_alpha(self.alpha_shift) if self.alpha_shift else self.params
        for r, s in enumerate(self.ab_shift, start=1):
            if s:
                p = p.shift_ab(r, s)
        return p


def check_convergence(p: Params) -> bool:
    """|q/(a1 a2 b1 b2)| < |q^alpha| < 1 and |q/(a1 a2 b1 b2)| < |q^alpha t^{2n-2}| < 1."""
    p = p.coerced()
    low = abs(p.q / (p.a1 * p.a2 * p.b1 * p.b2))
    m1 = abs(p.qalpha)
    m2 = abs(p.qalpha * p.t ** (2 * p.n - 2))
    return bool(low < m1 < 1 and low < m2 < 1)


def default_xi(p: Params, rng: np.random.Generator | None = None) -> tuple:
    """A generic base point near (1, t, t^2, ...) with a random perturbation."""
    rng = np.random.default_rng(0) if rng is None else rng
    t = complex(p.t)
    pts = []
    for j in range(p.n):
        r = float(np.exp(rng.uniform(-0.15, 0.15)))
        phi = float(rng.uniform(-0.4, 0.4))
        pts.append(0.83 * t ** j * r * complex(np.cos(phi), np.sin(phi)))
    return tuple(pts)


# --------------------------------------------------------------------------
# weights

def _ratio_table(x, y, q, M: int):
    """(x; q)_m / (y; q)_m for m = -M..M, indexed by m + M.

    Built one factor ratio at a time so that neither factorial overflows.  An
    entry is None when the lattice point hits a zero of the denominator (or
    of the numerator, which makes the base point itself singular).
    """
    x, y, q = cnum(x), cnum(y), cnum(q)
    out = [None] * (2 * M + 1)
    out[M] = cnum(1)

    def small(f, v):
        return abs(f) <= POLE_TOL * max(1.0, abs(v))

    acc = cnum(1)
    qs = cnum(1)
    for m in range(1, M + 1):
        fx, fy = 1 - x * qs, 1 - y * qs
        if acc is not None and (small(fx, x * qs) or small(fy, y * qs)):
            acc = None
        if acc is not None:
            acc = acc * fx / fy
        out[M + m] = acc
        qs = qs * q
    acc = cnum(1)
    qs = 1 / q
    for m in range(1, M + 1):
        fx, fy = 1 - x * qs, 1 - y * qs
        if acc is not None and (small(fx, x * qs) or small(fy, y * qs)):
            acc = None
        if acc is not None:
            acc = acc * fy / fx
        out[M - m] = acc
        qs = qs / q
    return out


def _lookup(table, M, m, label):
    """Vectorised table lookup; a None entry means the lattice point sits on a pole."""
    m = np.asarray(m)
    vals = [table[M + int(v)] for v in m.ravel()]
    if any(v is None for v in vals):
        raise PoleHit(f"lattice point meets a zero of {label}")
    return carray(vals).reshape(m.shape)


def lattice(n: int, N: int) -> np.ndarray:
    """All nu in [-N, N]^n, shape (count, n)."""
    axes = [np.arange(-N, N + 1)] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def weight_ratio(p: Params, xi, nu) -> np.ndarray:
    """Phi(xi q^nu) / Phi(xi) for one nu (shape (n,)) or a stack (shape (..., n))."""
    p = p.coerced()
    nu = np.asarray(nu, dtype=int)
    single = nu.ndim == 1
    nu = np.atleast_2d(nu)
    n = nu.shape[-1]
    xi = [cnum(v) for v in xi]
    q, t, Q = p.q, p.t, p.qalpha
    M = int(np.max(np.abs(nu))) if nu.size else 0
    out = carray(np.ones(nu.shape[0]))
    # z^alpha and the z_j^{2 tau - 1} prefactors, as integer powers
    tot = nu.sum(axis=-1)
    coeff = sum(nu[:, j] * (n - 1 - j) for j in range(n))
    out = out * _int_power(Q, tot) * _int_power(t * t / q, coeff)
    for i in range(n):
        for a, b in ((p.a1, p.b1), (p.a2, p.b2)):
            tab = _ratio_table(b * xi[i], q / a * xi[i], q, M)
            out = out * _lookup(tab, M, nu[:, i], "(b z; q) / (q z / a; q)")
    for j in range(n):
        for k in range(j + 1, n):
            u = xi[k] / xi[j]
            m = nu[:, k] - nu[:, j]
            M2 = int(np.max(np.abs(m))) if m.size else 0
            tab = _ratio_table(t * u, q / t * u, q, M2)
            out = out * _lookup(tab, M2, m, "(t z_k/z_j; q) / (q z_k/(t z_j); q)")
    return out[0] if single else out


def _int_power(base, exps):
    exps = np.asarray(exps).ravel()
    cache = {}
    vals = []
    for e in exps:
        e = int(e)
        if e not in cache:
            cache[e] = cnum(base) ** e
        vals.append(cache[e])
    return carray(vals)


def one_step_factor(p: Params, z):
    """T_{q,z_1}Phi / Phi at z."""
    p = p.coerced()
    z = [cnum(v) for v in z]
    n = len(z)
    out = p.qalpha * p.t ** (2 * (n - 1)) * (1 - p.b1 * z[0]) * (1 - p.b2 * z[0])
    out /= (1 - p.q / p.a1 * z[0]) * (1 - p.q / p.a2 * z[0])
    for j in range(1, n):
        out *= (z[0] - z[j] / p.t) / (p.q * z[0] - p.t * z[j])
    return out


def shift_multiplier(p: Params, Z, alpha_shift: int = 0, ab_shift=(0, 0)):
    """Integrand multiplier turning Phi into its shifted version, at points Z (..., n)."""
    p = p.coerced()
    out = carray(np.ones(Z.shape[:-1]))
    if alpha_shift:
        out = out * np.prod(Z, axis=-1) ** alpha_shift
    for (a, b), s in zip(((p.a1, p.b1), (p.a2, p.b2)), ab_shift):
        for m in range(s):
            am = a * p.q ** m
            bm = b * p.q ** (-m)
            dnm = 1 - bm / p.q * Z
            if np.any(np.abs(dnm) <= POLE_TOL * np.maximum(1.0, np.abs(bm / p.q * Z))):
                raise PoleHit("shifted weight has a pole at a lattice point")
            out = out * np.prod((1 - Z / am) / dnm, axis=-1)
    return out


# --------------------------------------------------------------------------
# brackets

@dataclass
class BracketResult:
    value: complex
    N: int
    shells_used: int
    tail_estimate: float
    scale: float
    shell_sums: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"value": to_pair(self.value), "N": self.N, "shells_used": self.shells_used,
                "tail_estimate": float(self.tail_estimate), "scale": float(self.scale),
                "gauge": "phi_at_xi_normalized"}


def integrand_terms(spec: BracketSpec, N: int, func=None):
    """(nu, terms) of the lattice sum before the (1-q)^n factor.

    ``func(p_eff, Z)`` overrides the polynomial; it must return the full
    integrand without Phi (the polynomial times Delta for symmetric brackets).
    """
    p = spec.params.coerced()
    n = p.n
    nu = lattice(n, N)
    xi = carray(spec.xi)
    qpow = _int_power(p.q, nu.ravel()).reshape(nu.shape)
    Z = qpow * xi
    w = weight_ratio(p, spec.xi, nu)
    w = w * shift_multiplier(p, Z, spec.alpha_shift, spec.ab_shift)
    peff = spec.effective_params()
    if func is None:
        vals = interp.eval_numerator(spec.poly, peff, Z)
    else:
        vals = func(peff, Z)
    return nu, w * vals


def sum_shells(nu, terms, N: int, tail_tol: float, q, n: int, check: bool = True) -> BracketResult:
    shells = np.max(np.abs(nu), axis=-1)
    shell_sums = []
    mags = []
    for r in range(N + 1):
        sel = terms[shells == r]
        shell_sums.append(exact_sum(sel))
        mags.append(float(sum(abs(v) for v in sel)))
    total = exact_sum(shell_sums)
    scale = float(sum(mags))
    tail = mags[-1]
    pref = (1 - cnum(q)) ** n
    res = BracketResult(total * pref, N, N + 1, tail * abs(pref), scale * abs(pref), shell_sums)
    if check and tail > tail_tol * max(scale, 1e-300):
        raise NotConverged(f"outer shell carries {tail / max(scale, 1e-300):.2e} of the total magnitude "
                           f"(tolerance {tail_tol:.1e}) at N={N}")
    return res


def bracket(spec: BracketSpec, trunc: TruncationSpec | None = None, func=None,
            check_tail: bool = True) -> BracketResult:
    """(1-q)^n sum over nu in [-N, N]^n of weight * multipliers * integrand."""
    trunc = TruncationSpec.for_n(spec.params.n) if trunc is None else trunc
    with working_precision(trunc.precision_bits):
        for label, q in (("base", spec.params), ("shifted", spec.effective_params())):
            if not check_convergence(q):
                raise ConditionViolated(f"convergence inequalities fail at the {label} parameters")
        nu, terms = integrand_terms(spec, trunc.N, func)
        return sum_shells(nu, terms, trunc.N, trunc.tail_tol, spec.params.q, spec.params.n, check_tail)


def apply_T_alpha(spec: BracketSpec, times: int = 1) -> BracketSpec:
    return replace(spec, alpha_shift=spec.alpha_shift + times)


def apply_T_ab(spec: BracketSpec, r: int, times: int = 1) -> BracketSpec:
    if r not in (1, 2):
        raise ValueError("pair index r must be 1 or 2")
    s = list(spec.ab_shift)
    s[r - 1] += times
    return replace(spec, ab_shift=tuple(s))


def make_bracket(poly, p: Params, xi=None, **kw) -> BracketSpec:
    poly = parse_polyspec(poly) if isinstance(poly, str) else poly
    xi = default_xi(p) if xi is None else tuple(complex(v) for v in xi)
    return BracketSpec(poly, xi, p, **kw)


# --------------------------------------------------------------------------
# the nabla operator and the factors F_i, G_i

def FG_eval(p: Params, which: str, i: int, z):
    """F_i or G_i (1-based i) at z, vectorised over leading axes of z."""
    p = p.coerced()
    z = carray(z) if not isinstance(z, np.ndarray) else z
    n = z.shape[-1]
    zi = z[..., i - 1]
    if which == "F":
        out = (1 - zi / p.a1) * (1 - zi / p.a2)
        for k in range(n):
            if k != i - 1:
                out = out * (zi - p.t * z[..., k])
        return out
    if which == "G":
        out = p.qalpha * p.t ** (2 * (n - 1)) * (1 - p.b1 * zi) * (1 - p.b2 * zi)
        for k in range(n):
            if k != i - 1:
                out = out * (zi - z[..., k] / p.t)
        return out
    raise ValueError("which must be 'F' or 'G'")


def nabla_integrand(p: Params, phi, z):
    """(nabla phi)(z) = phi(z) - (T_{z_1}Phi / Phi)(z) phi(q z_1, z_2, ...)."""
    p = p.coerced()
    z = [cnum(v) for v in z]
    zs = [p.q * z[0]] + z[1:]
    return phi(carray(z)) - one_step_factor(p, z) * phi(carray(zs))


def phi_ki(p: Params, k: int, i: int, z, prime: bool = False):
    """F_1(z) E^{(n-1)}_{k-1,i}(z_2, ..., z_n) with (a, b) = (a1, b2)."""
    p = p.coerced()
    z = carray(z) if not isinstance(z, np.ndarray) else z
    rest = z[..., 1:]
    E = interp.Eprime_ki if prime else interp.E_ki
    return FG_eval(p, "F", 1, z) * E(k - 1, i, p.a1, p.b2, p.t, rest)


def nabla_phi_ki(p: Params, k: int, i: int, z, prime: bool = False):
    """(F_1 - G_1) E^{(n-1)}_{k-1,i}(z_2..z_n), the closed form of nabla phi_{k,i}."""
    p = p.coerced()
    z = carray(z) if not isinstance(z, np.ndarray) else z
    E = interp.Eprime_ki if prime else interp.E_ki
    return (FG_eval(p, "F", 1, z) - FG_eval(p, "G", 1, z)) * E(k - 1, i, p.a1, p.b2, p.t, z[..., 1:])


def phitilde_ki(p: Params, k: int, i: int, z, prime: bool = False):
    """Skew-symmetrisation of nabla phi_{k,i}: sum_j (-1)^{j-1}(F_j - G_j) A(E^{(n-1)})(z hat j)."""
    p = p.coerced()
    z = carray(z) if not isinstance(z, np.ndarray) else z
    n = z.shape[-1]
    out = 0
    for j in range(1, n + 1):
        rest = np.delete(z, j - 1, axis=-1)
        if n > 1:
            inner = interp.skew_E(k - 1, i, p.a1, p.b2, p.t, rest, prime=prime)
        else:
            inner = carray(np.ones(z.shape[:-1]))
        out = out + (-1) ** (j - 1) * (FG_eval(p, "F", j, z) - FG_eval(p, "G", j, z)) * inner
    return out


# --------------------------------------------------------------------------
# closed-form values of F and G at the points zeta_j

def FG_closed_form(p: Params, which: str, j: int, x=None, y=None):
    """Closed-form values of F_1, F_{j+1}, G_n at zeta_j(x, 1/b2) and of F_1, G_j, G_n at zeta_j(a1, y).

    ``which`` is one of F1_xb, Fj1_xb, Gn_xb, F1_ay, Gj_ay, Gn_ay.
    """
    from .qcore import qpoch
    p = p.coerced()
    n, t, Q, a1, a2, b1, b2 = p.n, p.t, p.qalpha, p.a1, p.a2, p.b1, p.b2
    ti = 1 / t

    def C2(m):
        return m * (m - 1) // 2

    if which == "F1_xb":
        x = cnum(x)
        return ((1 - 1 / (a1 * b2) * t ** (-(j - 1))) * (1 - 1 / (a2 * b2) * t ** (-(j - 1)))
                / ((b2 * t ** (j - 1)) ** (n - 1) * (1 - t)) * qpoch(t, t, j) * qpoch(x * b2 * t ** j, t, n - j))
    if which == "Fj1_xb":
        x = cnum(x)
        return ((-1) ** j * (1 - x / a1) * (1 - x / a2) * x ** (n - j - 1)
                / (b2 ** j * t ** (C2(j - 1) - 1) * (1 - t)) * qpoch(t, t, n - j) * qpoch(x * b2 / t, t, j))
    if which == "Gn_xb":
        x = cnum(x)
        return (Q * t ** (2 * (n - 1)) * (1 - b1 * x * t ** (n - j - 1)) * (1 - b2 * x * t ** (n - j - 1))
                * (-1 / b2) ** j * t ** (-C2(j + 1)) * qpoch(x * b2 * t ** (n - j), t, j)
                * (x * t ** (n - j - 1)) ** (n - j - 1) * qpoch(ti, ti, n - j) / (1 - ti))
    if which == "F1_ay":
        y = cnum(y)
        return ((1 - y / a2 * t ** (-(j - 1))) * (-y * t) ** (j - 1) * (-a1 * t) ** (n - j)
                * t ** (C2(n - j) - C2(j - 1)) * qpoch(y / a1 * t ** (-(n - 1)), t, n - j + 1)
                * qpoch(ti, ti, j) / (1 - ti))
    if which == "Gj_ay":
        y = cnum(y)
        return (Q * t ** (2 * (n - 1)) * (1 - y * b1) * (1 - y * b2) * y ** (j - 1) * (-a1 / t) ** (n - j)
                * t ** C2(n - j) * qpoch(y / a1 * t ** (-(n - j - 2)), t, n - j) * qpoch(ti, ti, j) / (1 - ti))
    if which == "Gn_ay":
        y = cnum(y)
        return (Q * t ** (2 * (n - 1)) * (1 - a1 * b1 * t ** (n - j - 1)) * (1 - a1 * b2 * t ** (n - j - 1))
                * (a1 * t ** (n - j - 1)) ** (n - 1) * qpoch(y / a1 * t ** (-(n - 1)), t, j)
                * qpoch(ti, ti, n - j) / (1 - ti))
    raise ValueError(f"unknown closed form {which!r}")


FG_FORMS = {
    # name: (F or G, index as a function of (n, j), point kind)
    "F1_xb": ("F", lambda n, j: 1, "xb"),
    "Fj1_xb": ("F", lambda n, j: j + 1, "xb"),
    "Gn_xb": ("G", lambda n, j: n, "xb"),
    "F1_ay": ("F", lambda n, j: 1, "ay"),
    "Gj_ay": ("G", lambda n, j: j, "ay"),
    "Gn_ay": ("G", lambda n, j: n, "ay"),
}


def zeta_point(p: Params, j: int, x, y):
    return interp.materialize(interp.SpecialPoint("zeta", j, x, y), p)


__all__ = [
    "TruncationSpec", "BracketSpec", "BracketResult", "check_convergence", "default_xi", "weight_ratio",
    "one_step_factor", "shift_multiplier", "bracket", "apply_T_alpha", "apply_T_ab", "make_bracket",
    "FG_eval", "nabla_integrand", "phi_ki", "nabla_phi_ki", "phitilde_ki", "FG_closed_form", "FG_FORMS",
    "zeta_point", "lattice", "integrand_terms", "sum_shells",
]
