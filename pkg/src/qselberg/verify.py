"""Numerical certification of the identities: one :class:`IdentityReport` per
checked instance, aggregated into suites with deterministic JSON output.

Residuals are scale-normalised: the scale of an identity is the largest
magnitude among its terms (for matrix products, per entry, the largest
product of factor entries that feeds that entry).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gauss, interp, jackson
from .errors import IndexOutOfRange, SeriesDiverged, Unsupported
from .gauss import ClassicalParams
from .interp import PolySpec, SpecialPoint
from .jackson import BracketSpec, TruncationSpec
from .qcore import Params, carray, ceye, check_generic, sample_generic, working_precision

TOL_RATIONAL = 1e-10
TOL_DIRECT = 1e-9
TOL_DET = 1e-9
TOL_INTEGRAL = 1e-6
TOL_SERIES = 1e-12
FLOOR = 1e-300
# residual level below which "decreasing with N" is not required (rounding floor)
ROUNDING_LEVEL = 1e-12
DET_BITS = 160

SUITES = ("matrices", "polynomials", "integrals-n1", "integrals-n2", "classical", "all", "none")


@dataclass
class IdentityReport:
    identity_id: str
    params_digest: str
    n: int
    absolute_residual: float
    relative_residual: float
    scale: float
    passed: bool
    tolerance: float
    runtime_ms: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"identity_id": self.identity_id, "params_digest": self.params_digest, "n": self.n,
                "absolute_residual": self.absolute_residual, "relative_residual": self.relative_residual,
                "scale": self.scale, "pass": self.passed, "tolerance": self.tolerance,
                "runtime_ms": self.runtime_ms, "meta": self.meta}

    @classmethod
    def from_json(cls, d: dict) -> "IdentityReport":
        d = dict(d)
        d["passed"] = d.pop("pass")
        return cls(**d)


def _digest(p) -> str:
    if isinstance(p, Params):
        return p.digest()
    return hashlib.sha256(json.dumps(p.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def make_report(identity_id, p, absolute, scale, tol, t0, meta=None, n=None) -> IdentityReport:
    absolute = float(absolute)
    scale = float(scale)
    rel = absolute / max(scale, FLOOR)
    ok = bool(rel <= tol) and math.isfinite(rel)
    return IdentityReport(identity_id, _digest(p), int(p.n if n is None else n), absolute, rel, scale, ok, tol,
                          (time.perf_counter() - t0) * 1e3, dict(meta or {}))


def scalar_report(identity_id, p, lhs, rhs, terms, tol, t0, meta=None, n=None) -> IdentityReport:
    """|lhs - rhs| against the largest magnitude in ``terms`` (plus both sides)."""
    scale = max([float(abs(v)) for v in terms] + [float(abs(lhs)), float(abs(rhs))])
    return make_report(identity_id, p, abs(lhs - rhs), scale, tol, t0, meta, n)


def zero_report(identity_id, p, value, scale, tol, t0, meta=None, n=None) -> IdentityReport:
    return make_report(identity_id, p, abs(value), scale, tol, t0, dict(meta or {}, kind="zero"), n)


# --------------------------------------------------------------------------
# matrix helpers

def _absf(m) -> np.ndarray:
    m = np.asarray(m)
    if m.dtype == object:
        return np.vectorize(lambda v: float(abs(v)), otypes=[float])(m)
    return np.abs(m)


def chain_scale(*mats) -> np.ndarray:
    """Entrywise largest single-path product max_k |A_ik||B_kj|... along the chain."""
    S = _absf(mats[0])
    for m in mats[1:]:
        S = np.max(S[:, :, None] * _absf(m)[None, :, :], axis=1)
    return S


def factor_chain(F: gauss.GaussFactorization):
    return (F.lower, F.diag, F.upper) if F.order == "LDU" else (F.upper, F.diag, F.lower)


def matrix_report(identity_id, p, X, Y, S, tol, t0, meta=None, n=None) -> IdentityReport:
    D = _absf(np.asarray(X) - np.asarray(Y))
    S = np.maximum(np.asarray(S, dtype=float), FLOOR)
    rel = D / S
    idx = np.unravel_index(int(np.argmax(rel)), rel.shape)
    return make_report(identity_id, p, D[idx], S[idx], tol, t0,
                       dict(meta or {}, worst_entry=[int(idx[0]), int(idx[1])]), n)


def _mul_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return out


# --------------------------------------------------------------------------
# matrices

def verify_decompositions(p: Params) -> list:
    """Both Gauss decompositions of R and of A agree."""
    out = []
    for name, build in (("R", gauss.build_R_factors), ("A", gauss.build_A_factors)):
        t0 = time.perf_counter()
        F1, F2 = build(p, "LDU"), build(p, "UDL")
        S = np.maximum(chain_scale(*factor_chain(F1)), chain_scale(*factor_chain(F2)))
        out.append(matrix_report(f"matrix/{name}/ldu-equals-udl", p, F1.product(), F2.product(), S,
                                 TOL_RATIONAL, t0))
    return out


def verify_direct_R(p: Params) -> IdentityReport:
    """Factored R against R solved from the vanishing of Matsuo polynomials."""
    t0 = time.perf_counter()
    F = gauss.build_R_factors(p, "LDU")
    Rd = gauss.build_R_direct(p)
    S = np.maximum(chain_scale(*factor_chain(F)), _absf(Rd))
    return matrix_report("matrix/R/factored-equals-direct", p, F.product(), Rd, S, TOL_DIRECT, t0)


def verify_inverses(p: Params) -> list:
    out = []
    n = p.n
    I = ceye(n + 1)
    RF = factor_chain(gauss.build_R_factors(p, "LDU"))
    for order in ("UDL", "LDU"):
        t0 = time.perf_counter()
        chain = RF + factor_chain(gauss.build_R_inverse(p, order))
        S = np.maximum(chain_scale(*chain), _absf(I))
        out.append(matrix_report(f"matrix/R/times-inverse-{order.lower()}", p, _mul_chain(chain), I, S,
                                 TOL_RATIONAL, t0))
    t0 = time.perf_counter()
    Rinv = gauss.build_R_inverse(p).product()
    J = np.fliplr(ceye(n + 1))
    Rbar = gauss.build_R_factors(p.swapped(), "LDU")
    chain = (J,) + factor_chain(Rbar) + (J,)
    out.append(matrix_report("matrix/R/inverse-equals-reversed-swap", p, Rinv, _mul_chain(chain),
                             np.maximum(chain_scale(*factor_chain(gauss.build_R_inverse(p))), chain_scale(*chain)),
                             TOL_RATIONAL, t0))
    pairs = (
        ("matrix/A/upper-times-inverse", gauss.build_A_factors(p, "LDU").upper, gauss.build_intermediate(p, "UAinv")),
        ("matrix/A/udl-lower-times-inverse", gauss.build_A_factors(p, "UDL").lower,
         gauss.build_intermediate(p, "LprimeAinv")),
        ("matrix/A/utilde-times-vtilde", gauss.build_intermediate(p, "Utilde"), gauss.build_intermediate(p, "Vtilde")),
    )
    for ident, X, Y in pairs:
        t0 = time.perf_counter()
        S = np.maximum(chain_scale(X, Y), _absf(I))
        out.append(matrix_report(ident, p, X @ Y, I, S, TOL_RATIONAL, t0))
    return out


def verify_intermediate_products(p: Params) -> list:
    out = []
    FA = gauss.build_A_factors(p, "LDU")
    FR = gauss.build_R_factors(p, "LDU")
    A, R = FA.product(), FR.product()
    SA, SR = chain_scale(*factor_chain(FA)), chain_scale(*factor_chain(FR))
    B = lambda w: gauss.build_intermediate(p, w)  # noqa: E731
    cases = (
        ("matrix/A/ltilde-utilde", ("Ltilde", "Utilde"), A, SA),
        ("matrix/A/utildeprime-ltildeprime", ("UtildePrime_app", "LtildePrime_app"), A, SA),
        ("matrix/R/ltilde-utilde", ("Ltilde_R", "Utilde_R"), R, SR),
        ("matrix/R/utildeprime-ltildeprime", ("UtildePrime_R", "LtildePrime_R"), R, SR),
    )
    for ident, names, Y, SY in cases:
        t0 = time.perf_counter()
        mats = [B(w) for w in names]
        out.append(matrix_report(ident, p, mats[0] @ mats[1], Y, np.maximum(chain_scale(*mats), SY),
                                 TOL_RATIONAL, t0))
    return out


def verify_determinants(p: Params, bits: int = DET_BITS) -> list:
    """Closed-form determinants against elimination, both at raised precision."""
    out = []
    with working_precision(bits):
        mats = {
            "R": lambda: gauss.build_R_factors(p).product(),
            "K1": lambda: gauss.build_K(p, 1),
            "K2": lambda: gauss.build_K(p, 2),
            "A": lambda: gauss.build_A_factors(p).product(),
        }
        for name, make in mats.items():
            t0 = time.perf_counter()
            formula = gauss.det_formula(p, name)
            elim = gauss.det_elimination(make())
            out.append(make_report(f"matrix/{name}/determinant", p, abs(formula - elim),
                                   max(abs(formula), abs(elim)), TOL_DET, t0, {"precision_bits": bits}))
    return out


def _random_points(rng, n, count):
    pts = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return pts * 0.8


def verify_pointwise_transitions(p: Params, rng, count: int = 20) -> list:
    """Row identities between polynomial bases at random points."""
    out = []
    pc = p.coerced()
    n = p.n
    R = gauss.build_R_factors(p).product()
    Ut = gauss.build_intermediate(p, "Utilde_R")
    Lt = gauss.build_intermediate(p, "Ltilde_R")
    Ltp = gauss.build_intermediate(p, "LtildePrime_R")
    Utp = gauss.build_intermediate(p, "UtildePrime_R")
    Z = _random_points(rng, n, count)
    t = pc.t
    e_a2b1 = np.array([[interp.matsuo(n - j, pc.a2, pc.b1, t, z) for j in range(n + 1)] for z in Z])
    e_a1b2 = np.array([[interp.matsuo(j, pc.a1, pc.b2, t, z) for j in range(n + 1)] for z in Z])
    f_t = np.array([interp.lagrange_all(pc.a1, pc.a2, t, z)[::-1] for z in Z])
    f_b = np.array([interp.lagrange_all(1 / pc.b1, 1 / pc.b2, 1 / t, z)[::-1] for z in Z])
    cases = (
        ("poly/transition/matsuo-bases", e_a1b2, R, e_a2b1),
        ("poly/transition/lagrange-to-matsuo", f_t, Ut, e_a2b1),
        ("poly/transition/matsuo-to-lagrange", e_a1b2, Lt, f_t),
        ("poly/transition/lagrange-inverse-base-to-matsuo", f_b, Ltp, e_a2b1),
        ("poly/transition/matsuo-to-lagrange-inverse-base", e_a1b2, Utp, f_b),
    )
    for ident, row, M, target in cases:
        t0 = time.perf_counter()
        X = row @ M
        S = np.maximum(chain_scale(row, M), _absf(target))
        out.append(matrix_report(ident, p, X, target, S, TOL_DIRECT, t0, {"points": count}))
    return out


def verify_matrix_identities(p: Params, det_bits: int = DET_BITS) -> list:
    out = verify_decompositions(p)
    if p.n <= 5:
        out.append(verify_direct_R(p))
    out += verify_inverses(p)
    out += verify_intermediate_products(p)
    out += verify_determinants(p, det_bits)
    return out


# --------------------------------------------------------------------------
# polynomials

def _closed_vs_direct(ident, p, spec, sp, rng_free, out, forms=(0,)):
    for form in forms:
        t0 = time.perf_counter()
        try:
            closed = interp.closed_form(spec, sp, p, form=form)
        except Unsupported:
            return
        z = interp.materialize(sp, p, spec)
        val, scale = interp.eval_poly(spec, p, z, return_scale=True)
        meta = {"spec": str(spec), "point": sp.kind, "j": sp.j, "form": form}
        if closed == 0:
            out.append(zero_report(ident, p, val, scale, TOL_RATIONAL, t0, meta))
        else:
            out.append(scalar_report(ident, p, val, closed, [], TOL_RATIONAL, t0, meta))


def verify_polynomial_identities(p: Params, rng=None) -> list:
    """Closed-form values of the interpolation polynomials at structured points,
    the factor values F_i, G_i, the skew-symmetrised nabla expansions and the
    basis transitions evaluated at random points."""
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    n = p.n
    pc = p.coerced()

    def free(count):
        return tuple(complex(v) for v in _random_points(rng, max(count, 0), 1)[0])

    xr = complex(*rng.normal(size=2)) * 0.7
    yr = complex(*rng.normal(size=2)) * 0.7
    for i in range(n + 1):
        spec = PolySpec("matsuo", (i,), ("a1", "b2"))
        for j in range(n + 1):
            _closed_vs_direct(f"poly/matsuo/at-zeta-a-binv/i={i},j={j}", p, spec,
                              SpecialPoint("zeta", j, "a", "b^-1"), None, out, forms=(0, 1))
    for k in range(n + 1):
        for i in range(n + 1):
            spec = PolySpec("etilde", (k, i), ("a1", "b2"))
            for j in range(n + 1):
                if i + k <= n:
                    _closed_vs_direct(f"poly/etilde/at-zeta-x-binv/k={k},i={i},j={j}", p, spec,
                                      SpecialPoint("zeta", j, xr, "b^-1"), None, out)
                if i + k >= n:
                    _closed_vs_direct(f"poly/etilde/at-zeta-a-y/k={k},i={i},j={j}", p, spec,
                                      SpecialPoint("zeta", j, "a", yr), None, out)
                _closed_vs_direct(f"poly/etilde/at-descending-binv-prefix/k={k},i={i},j={j}", p, spec,
                                  SpecialPoint("desc_prefix", j, "b^-1", None, free(n - j)), None, out, forms=(0, 1))
                _closed_vs_direct(f"poly/etilde/at-ascending-a-suffix/k={k},i={i},j={j}", p, spec,
                                  SpecialPoint("asc_suffix", j, "a", None, free(j)), None, out)
    # Lagrange interpolation polynomials
    z = _random_points(rng, n, 1)[0]
    rec = interp.lagrange_all(pc.a1, pc.a2, pc.t, z)
    for r in range(n + 1):
        t0 = time.perf_counter()
        sub = interp.lagrange_subset(r, pc.a1, pc.a2, pc.t, z)
        out.append(scalar_report(f"poly/lagrange/recurrence-equals-definition/r={r}", p, rec[r], sub,
                                 [interp.lagrange_scale(r, pc.a1, pc.a2, pc.t, z)], TOL_RATIONAL, t0))
        t0 = time.perf_counter()
        mirror = interp.lagrange_subset(n - r, pc.a2, pc.a1, pc.t, z)
        out.append(scalar_report(f"poly/lagrange/endpoint-swap-symmetry/r={r}", p, sub, mirror,
                                 [interp.lagrange_scale(r, pc.a1, pc.a2, pc.t, z)], TOL_RATIONAL, t0))
    for i in range(n + 1):
        spec = PolySpec("lagrange", (i,), ("a1", "a2"))
        for j in range(n + 1):
            _closed_vs_direct(f"poly/lagrange/at-nodes/i={i},j={j}", p, spec,
                              SpecialPoint("xi", j, "x1", "x2"), None, out)
            _closed_vs_direct(f"poly/lagrange/at-shifted-nodes/i={i},j={j}", p, spec,
                              SpecialPoint("xi", j, xr, "x2"), None, out)
            _closed_vs_direct(f"poly/lagrange/at-x1-prefix/i={i},j={j}", p, spec,
                              SpecialPoint("asc_prefix", j, "x1", None, free(n - j)), None, out, forms=(0, 1))
            _closed_vs_direct(f"poly/lagrange/at-x2-suffix/i={i},j={j}", p, spec,
                              SpecialPoint("asc_suffix", j, "x2", None, free(j)), None, out, forms=(0, 1))
    out += verify_FG(p, xr, yr)
    out += verify_nabla_expansions(p, rng)
    out += verify_pointwise_transitions(p, rng)
    return out


FG_RANGES = {
    "F1_xb": lambda n: range(1, n + 1), "Fj1_xb": lambda n: range(0, n), "Gn_xb": lambda n: range(0, n),
    "F1_ay": lambda n: range(1, n + 1), "Gj_ay": lambda n: range(1, n + 1), "Gn_ay": lambda n: range(0, n),
}


def _FG_scale(p: Params, which, i, z) -> float:
    """Product of the moduli of the monomials in each factor of F_i or G_i."""
    p = p.coerced()
    zi = z[i - 1]
    if which == "F":
        s = (1 + abs(zi / p.a1)) * (1 + abs(zi / p.a2))
        other = abs(p.t)
    else:
        s = abs(p.qalpha * p.t ** (2 * (len(z) - 1))) * (1 + abs(p.b1 * zi)) * (1 + abs(p.b2 * zi))
        other = 1 / abs(p.t)
    for k, zk in enumerate(z):
        if k != i - 1:
            s *= abs(zi) + other * abs(zk)
    return float(s)


def verify_FG(p: Params, x, y) -> list:
    out = []
    n = p.n
    pc = p.coerced()
    for name, (fg, idx, kind) in jackson.FG_FORMS.items():
        for j in FG_RANGES[name](n):
            t0 = time.perf_counter()
            z = jackson.zeta_point(p, j, x, 1 / pc.b2) if kind == "xb" else jackson.zeta_point(p, j, pc.a1, y)
            i = idx(n, j)
            direct = jackson.FG_eval(p, fg, i, z)
            closed = jackson.FG_closed_form(p, name, j, x=x, y=y)
            out.append(scalar_report(f"poly/nabla-factors/{name}/j={j}", p, direct, closed, [], TOL_RATIONAL, t0))
    for j in range(n + 1):
        zx = jackson.zeta_point(p, j, x, 1 / pc.b2)
        za = jackson.zeta_point(p, j, pc.a1, y)
        claims = [("F", i + 1, zx, "xb") for i in range(1, n) if i != j]
        claims += [("G", i, zx, "xb") for i in range(1, n)]
        claims += [("F", i, za, "ay") for i in range(2, n + 1)]
        claims += [("G", i, za, "ay") for i in range(1, n + 1) if i not in (n, j)]
        for fg, i, z, kind in claims:
            t0 = time.perf_counter()
            out.append(zero_report(f"poly/nabla-factors/{fg}{i}-vanishes-{kind}/j={j}", p,
                                   jackson.FG_eval(p, fg, i, z), _FG_scale(p, fg, i, z), TOL_RATIONAL, t0))
    return out


def expansion_coefficients(p: Params, family: str, k: int, i: int) -> list:
    """[(coefficient, coefficient in expanded form, (k', i'))] of a nabla expansion.

    family 'c'/'d' expand the skew-symmetrised nabla phi_{k,i} in E~; 'cprime'/'dprime'
    expand nabla phi'_{k,i-1} in E~'.
    """
    pc = p.coerced()
    n = p.n
    t, Q, a1, a2, b1, b2 = pc.t, pc.qalpha, pc.a1, pc.a2, pc.b1, pc.b2
    P = a1 * a2 * b1 * b2
    if family == "c":
        return [(-(1 - Q * P * t ** (2 * n - k - 1)) * t ** (k - 1) / (a1 * a2 * b2),
                 Q * b1 * t ** (2 * n - 2) - t ** (k - 1) / (a1 * a2 * b2), (k, i)),
                ((1 - Q * a2 * b2 * t ** (n + i - k)) * t ** (n - i - 1) / (a2 * b2),
                 t ** (n - i - 1) / (a2 * b2) - Q * t ** (2 * n - k - 1), (k - 1, i)),
                (-(1 - a2 * b2 * t ** i) * t ** (n - i - 1) / (a2 * b2),
                 t ** (n - 1) * (1 - t ** (-i) / (a2 * b2)), (k - 1, i + 1))]
    if family == "d":
        return [(-Q / a1 * t ** (n + i - 1) * (1 - a1 * b1 * t ** (n - i - 1)),
                 Q * b1 * t ** (2 * n - 2) - Q / a1 * t ** (n + i - 1), (k, i)),
                (-(1 - Q * a2 * b2 * t ** (n + i - k)) * t ** (k - 1) / a2,
                 Q * b2 * t ** (n + i - 1) - t ** (k - 1) / a2, (k, i + 1)),
                (t ** (n - 1) * (1 - Q * t ** (n - k)), t ** (n - 1) - Q * t ** (2 * n - k - 1), (k - 1, i + 1))]
    if family == "cprime":
        c = [(-t ** (n - 1) * (1 - Q * P * t ** (2 * n - k - 1)) / a2, (k, i)),
             (t ** (n + k - 2) * (1 - Q * a1 * b1 * t ** (2 * n - k - i)), (k - 1, i)),
             (-Q * t ** (2 * n - 2) * (1 - a1 * b1 * t ** (n - i)), (k - 1, i - 1))]
        return [(v, v, ki) for v, ki in c]
    if family == "dprime":
        d = [(-t ** (n - 1) * (1 - a2 * b2 * t ** (i - 1)) / a2, (k, i)),
             (-t ** (n + i - 2) * (1 - Q * a1 * b1 * t ** (2 * n - k - i)) / a1, (k, i - 1)),
             (t ** (n + k - 2) * (1 - Q * t ** (n - k)), (k - 1, i - 1))]
        return [(v, v, ki) for v, ki in d]
    raise ValueError(family)


def verify_nabla_expansions(p: Params, rng) -> list:
    out = []
    n = p.n
    pc = p.coerced()
    z = carray(_random_points(rng, n, 1)[0])
    d = interp.delta(z)

    def Et(k, i, prime):
        return interp.etilde(k, i, pc.a1, pc.b2, pc.t, z, prime=prime)

    for k in range(1, n + 1):
        for i in range(0, n):
            lhs = jackson.phitilde_ki(pc, k, i, z) / d
            for fam, ok in (("c", i + k <= n), ("d", i + k >= n)):
                if not ok:
                    continue
                t0 = time.perf_counter()
                coeffs = expansion_coefficients(p, fam, k, i)
                terms = [c * Et(kk, ii, False) for c, _, (kk, ii) in coeffs]
                out.append(scalar_report(f"poly/nabla-expansion/{fam}/k={k},i={i}", p, lhs, sum(terms), terms,
                                         TOL_RATIONAL, t0))
                t0 = time.perf_counter()
                gap = max(abs(c1 - c2) / max(abs(c1), abs(c2), FLOOR) for c1, c2, _ in coeffs)
                out.append(make_report(f"poly/nabla-expansion/{fam}-coefficient-forms/k={k},i={i}", p, gap, 1.0,
                                       TOL_RATIONAL, t0))
    for k in range(1, n + 1):
        for i in range(1, n + 1):
            lhs = jackson.phitilde_ki(pc, k, i - 1, z, prime=True) / d
            for fam, ok in (("cprime", k <= i), ("dprime", i <= k)):
                if not ok:
                    continue
                t0 = time.perf_counter()
                coeffs = expansion_coefficients(p, fam, k, i)
                terms = [c * Et(kk, ii, True) for c, _, (kk, ii) in coeffs]
                out.append(scalar_report(f"poly/nabla-expansion/{fam}/k={k},i={i}", p, lhs, sum(terms), terms,
                                         TOL_RATIONAL, t0))
    return out


# --------------------------------------------------------------------------
# Jackson integrals

class BracketCache:
    """Brackets sharing parameters and base point, memoised by (poly, shifts, N)."""

    def __init__(self, p: Params, xi, trunc: TruncationSpec):
        self.p, self.xi, self.trunc = p, tuple(xi), trunc
        self._memo = {}

    def radius(self, extra: int) -> TruncationSpec:
        return TruncationSpec(N=self.trunc.N + extra, tail_tol=self.trunc.tail_tol,
                              precision_bits=self.trunc.precision_bits)

    def get(self, poly: str, extra: int = 0, alpha_shift: int = 0, ab_shift=(0, 0)):
        key = (poly, extra, alpha_shift, tuple(ab_shift))
        if key not in self._memo:
            spec = BracketSpec(interp.parse_polyspec(poly), self.xi, self.p, alpha_shift, tuple(ab_shift))
            self._memo[key] = jackson.bracket(spec, self.radius(extra)).value
        return self._memo[key]


def _integral_report(ident, p, evaluate, tol, t0, meta=None, extra=10):
    """Residual of a linear relation at radius N and N + extra.

    ``evaluate(extra)`` returns (lhs, rhs, terms).  Passes when the residual
    at N is within tolerance and it does not grow with the radius (beyond the
    rounding level)."""
    lhs, rhs, terms = evaluate(0)
    lhs2, rhs2, terms2 = evaluate(extra)
    r = scalar_report(ident, p, lhs, rhs, terms, tol, t0, meta)
    r2 = scalar_report(ident, p, lhs2, rhs2, terms2, tol, t0)
    decreasing = r2.relative_residual < r.relative_residual or r2.relative_residual <= ROUNDING_LEVEL
    r.meta.update(relative_residual_larger_radius=r2.relative_residual, decreasing=bool(decreasing))
    r.passed = bool(r.passed and decreasing)
    return r


def _etilde(k, i, prime=False):
    return f"{'etildeprime' if prime else 'etilde'}[{k},{i}](a1,b2)"


def three_term_relations(p: Params):
    """[(name, [(coefficient, k, i) for the left side], [(coefficient, k, i) right side], prime)]."""
    pc = p.coerced()
    n = p.n
    t, Q, a1, a2, b1, b2 = pc.t, pc.qalpha, pc.a1, pc.a2, pc.b1, pc.b2
    P = a1 * a2 * b1 * b2
    rels = []
    for k in range(1, n + 1):
        for i in range(0, n + 1):
            if i + k <= n:
                rels.append((f"lower/k={k},i={i}", [((1 - Q * P * t ** (2 * n - k - 1)) / (a1 * t ** (n - i - k)), k, i)],
                             [(1 - Q * a2 * b2 * t ** (n + i - k), k - 1, i), (-(1 - a2 * b2 * t ** i), k - 1, i + 1)],
                             False))
            if i + k >= n and i + 1 <= n:
                rels.append((f"upper/k={k},i={i}", [(t ** (n - k) * (1 - Q * t ** (n - k)), k - 1, i + 1)],
                             [(Q / a1 * t ** (n + i - k) * (1 - a1 * b1 * t ** (n - i - 1)), k, i),
                              ((1 - Q * a2 * b2 * t ** (n + i - k)) / a2, k, i + 1)], False))
            if k <= i:
                rhs = [(t ** (k - 1) * (1 - Q * a1 * b1 * t ** (2 * n - k - i)), k - 1, i)]
                if i >= 1:
                    rhs.append((-Q * t ** (n - 1) * (1 - a1 * b1 * t ** (n - i)), k - 1, i - 1))
                rels.append((f"prime-upper/k={k},i={i}", [((1 - Q * P * t ** (2 * n - k - 1)) / a2, k, i)], rhs, True))
            if k >= i >= 1:
                rels.append((f"prime-lower/k={k},i={i}", [((1 - Q * a1 * b1 * t ** (2 * n - k - i)) / a1, k, i - 1)],
                             [(t ** (k - i) * (1 - Q * t ** (n - k)), k - 1, i - 1),
                              (-t ** (-(i - 1)) * (1 - a2 * b2 * t ** (i - 1)) / a2, k, i)], True))
    return rels


MULTI_STEP_TARGETS = {"L": lambda k, i, l, j: (k - l, i + j), "U": lambda k, i, l, j: (k - l + j, i - j),
                      "V": lambda k, i, l, j: (k + l, i - j), "Uprime_app": lambda k, i, l, j: (k - l, i - j),
                      "Lprime_app": lambda k, i, l, j: (k - l + j, i + j)}


def verify_three_term(p: Params, xi, trunc: TruncationSpec, cache: BracketCache | None = None) -> list:
    cache = BracketCache(p, xi, trunc) if cache is None else cache
    out = []
    for name, left, right, prime in three_term_relations(p):
        t0 = time.perf_counter()

        def evaluate(extra, left=left, right=right, prime=prime):
            lt = [c * cache.get(_etilde(k, i, prime), extra) for c, k, i in left]
            rt = [c * cache.get(_etilde(k, i, prime), extra) for c, k, i in right]
            return sum(lt), sum(rt), lt + rt

        out.append(_integral_report(f"integral/three-term/{name}", p, evaluate, TOL_INTEGRAL, t0))
    # multi-step expansions
    n = p.n
    for which, target in MULTI_STEP_TARGETS.items():
        prime = which.endswith("app")
        for k in range(n + 1):
            for i in range(n + 1):
                for l in range(2, n + 1):
                    coeffs = []
                    for j in range(l + 1):
                        try:
                            c = gauss.corollary42_coeff(p, which, k, i, l, j)
                        except IndexOutOfRange:
                            continue
                        coeffs.append((c, *target(k, i, l, j)))
                    if not coeffs:
                        continue
                    t0 = time.perf_counter()

                    def evaluate(extra, coeffs=coeffs, k=k, i=i, prime=prime):
                        terms = [c * cache.get(_etilde(kk, ii, prime), extra) for c, kk, ii in coeffs]
                        return cache.get(_etilde(k, i, prime), extra), sum(terms), terms

                    out.append(_integral_report(f"integral/multi-step/{which}/k={k},i={i},l={l}", p, evaluate,
                                                TOL_INTEGRAL, t0))
    return out


def verify_difference_systems(p: Params, xi, trunc: TruncationSpec, cache: BracketCache | None = None) -> list:
    cache = BracketCache(p, xi, trunc) if cache is None else cache
    out = []
    n = p.n
    A = gauss.build_A_factors(p).product()
    A1 = gauss.build_A_factors(p.shift_alpha()).product()
    K = {1: gauss.build_K(p, 1), 2: gauss.build_K(p, 2)}
    matsuo = [f"matsuo[{i}](a1,b2)" for i in range(n + 1)]
    matsuo_rev = [f"matsuo[{n - i}](a2,b1)" for i in range(n + 1)]
    systems = [("alpha-shift", matsuo, A, dict(alpha_shift=1)),
               ("alpha-shift-twice", matsuo, A @ A1, dict(alpha_shift=2)),
               ("pair1-shift", matsuo_rev, K[1], dict(ab_shift=(1, 0))),
               ("pair2-shift", matsuo_rev, K[2], dict(ab_shift=(0, 1)))]
    for name, polys, M, shift in systems:
        for j in range(n + 1):
            t0 = time.perf_counter()

            def evaluate(extra, polys=polys, M=M, shift=shift, j=j):
                row = [cache.get(s, extra) for s in polys]
                terms = [row[k] * M[k, j] for k in range(n + 1)]
                return cache.get(polys[j], extra, **shift), sum(terms), terms

            out.append(_integral_report(f"integral/system/{name}/component={j}", p, evaluate, TOL_INTEGRAL, t0))
    return out


def verify_nabla_vanishing(p: Params, xi, trunc: TruncationSpec, phi_list=None) -> list:
    """Lattice sums of Phi * nabla(phi) vanish, for phi_{k,i} and its skew-symmetrisation."""
    out = []
    n = p.n
    spec = BracketSpec(interp.parse_polyspec("matsuo[0](a1,b2)"), tuple(xi), p)
    if phi_list is None:
        phi_list = []
        for k in range(1, n + 1):
            for i in range(0, n):
                phi_list.append((f"phi/k={k},i={i}", lambda pe, Z, k=k, i=i: jackson.nabla_phi_ki(pe, k, i, Z),
                                 lambda pe, Z, k=k, i=i: jackson.phi_ki(pe, k, i, Z)))
                phi_list.append((f"skew-phi/k={k},i={i}",
                                 lambda pe, Z, k=k, i=i: jackson.phitilde_ki(pe, k, i, Z),
                                 lambda pe, Z, k=k, i=i: _skew_phi(pe, k, i, Z)))
        if n == 1:
            phi_list.append(("constant", lambda pe, Z: 1 - _one_step_vec(pe, Z), lambda pe, Z: np.ones(Z.shape[:-1])))
    for name, nabla_f, phi_f in phi_list:
        t0 = time.perf_counter()
        vals = []
        for extra in (0, 10):
            tr = TruncationSpec(N=trunc.N + extra, tail_tol=trunc.tail_tol, precision_bits=trunc.precision_bits)
            v = jackson.bracket(spec, tr, func=nabla_f, check_tail=False)
            s = jackson.bracket(spec, tr, func=phi_f)
            vals.append((v.value, s.scale))
        r = zero_report(f"integral/nabla-vanishes/{name}", p, vals[0][0], vals[0][1], TOL_INTEGRAL, t0)
        r2 = abs(vals[1][0]) / max(vals[1][1], FLOOR)
        decreasing = r2 < r.relative_residual or r2 <= ROUNDING_LEVEL
        r.meta.update(relative_residual_larger_radius=r2, decreasing=bool(decreasing))
        r.passed = bool(r.passed and decreasing)
        out.append(r)
    return out


def _skew_phi(p, k, i, Z):
    """Skew-symmetrisation of phi_{k,i} itself (the scale reference for its nabla)."""
    n = Z.shape[-1]
    out = 0
    for j in range(1, n + 1):
        rest = np.delete(Z, j - 1, axis=-1)
        inner = interp.skew_E(k - 1, i, p.a1, p.b2, p.t, rest) if n > 1 else 1
        out = out + (-1) ** (j - 1) * jackson.FG_eval(p, "F", j, Z) * inner
    return out


def _one_step_vec(p, Z):
    return np.array([jackson.one_step_factor(p, z) for z in Z])


def verify_integrals(p: Params, xi=None, trunc: TruncationSpec | None = None) -> list:
    xi = jackson.default_xi(p) if xi is None else xi
    trunc = TruncationSpec.for_n(p.n) if trunc is None else trunc
    cache = BracketCache(p, xi, trunc)
    out = (verify_three_term(p, xi, trunc, cache) + verify_difference_systems(p, xi, trunc, cache)
           + verify_nabla_vanishing(p, xi, trunc))
    for r in out:
        r.meta["N"] = trunc.N
    return out


# --------------------------------------------------------------------------
# classical limit

def hyp2f1(a, b, c, x, tol: float = 1e-14, max_terms: int = 100000):
    """Gauss 2F1 by its defining power series, stopping when terms fall below tol * |sum|."""
    if not abs(x) < 1:
        raise SeriesDiverged(f"2F1 series needs |x| < 1, got {x}")
    if float(c).is_integer() and c <= 0:
        raise SeriesDiverged("2F1 undefined for non-positive integer c")
    term = 1.0
    terms = [term]
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        terms.append(term)
        total = math.fsum(terms)
        if abs(term) < tol * abs(total) and abs(term * x) < tol * abs(total):
            return total
    raise SeriesDiverged(f"2F1 series did not reach tolerance in {max_terms} terms")


def classical_brackets(alpha, beta, gamma, X):
    """The two n = 1 classical integrals for X > 1, via 2F1 series (no quadrature)."""
    e0 = X ** gamma * math.gamma(alpha) * math.gamma(beta) / math.gamma(alpha + beta) \
        * hyp2f1(-gamma, alpha, alpha + beta, 1 / X)
    e1 = X ** (gamma - 1) * math.gamma(alpha) * math.gamma(beta + 1) / math.gamma(alpha + beta + 1) \
        * hyp2f1(1 - gamma, alpha, alpha + beta + 1, 1 / X)
    return e0, e1


def sample_contiguous_point(rng):
    """(a, b, c, x) with 0 < a < c, b real and 0 < x < 1."""
    a = float(rng.uniform(0.2, 1.5))
    c = a + float(rng.uniform(0.3, 1.5))
    b = float(rng.uniform(-1.2, 1.2))
    x = float(rng.uniform(0.05, 0.8))
    return a, b, c, x


def sample_classical(rng, n: int) -> ClassicalParams:
    """Positive alpha, beta, gamma, tau and x > 1."""
    return ClassicalParams(*(float(v) for v in rng.uniform(0.3, 2.5, 4)), float(rng.uniform(1.5, 4.0)), n)


def verify_classical_M(cp: ClassicalParams) -> IdentityReport:
    t0 = time.perf_counter()
    F1, F2 = gauss.build_classical_M(cp, "LDU"), gauss.build_classical_M(cp, "UDL")
    S = np.maximum(chain_scale(*factor_chain(F1)), chain_scale(*factor_chain(F2)))
    return matrix_report("classical/M/ldu-equals-udl", cp, F1.product(), F2.product(), S, TOL_RATIONAL, t0)


def verify_classical(rng=None, points: int = 20, n_max: int = 8, draws: int = 5) -> list:
    rng = np.random.default_rng(0) if rng is None else rng
    out = [verify_classical_M(sample_classical(rng, n)) for n in range(1, n_max + 1) for _ in range(draws)]
    for m in range(points):
        a, b, c, x = sample_contiguous_point(rng)
        cp = ClassicalParams(a, c - a, -b, 1.0, 1 / x, 1)
        F = hyp2f1
        t0 = time.perf_counter()
        f0, f1, f2 = F(a, b, c, x), F(a, b + 1, c + 1, x), F(a + 1, b + 1, c + 2, x)
        k1 = x * a * (c - b) / (c * (c + 1))
        out.append(scalar_report(f"classical/contiguous-raise-b/point={m}", cp, f0, f1 - k1 * f2, [f0, f1, k1 * f2],
                                 TOL_SERIES, t0))
        t0 = time.perf_counter()
        g1 = F(a + 1, b, c + 1, x)
        k2 = x * b * (c - a) / (c * (c + 1))
        out.append(scalar_report(f"classical/contiguous-raise-a/point={m}", cp, f0, g1 - k2 * f2, [f0, g1, k2 * f2],
                                 TOL_SERIES, t0))
        # the n = 1 three-term forms, with alpha = a, beta = c - a, gamma = -b, X = 1/x
        al, be, ga, X = a, c - a, -b, 1 / x
        e0, e1 = classical_brackets(al, be, ga, X)
        s0, s1 = classical_brackets(al + 1, be, ga, X)
        norm = 1 / ((c - a) * X ** (-b) * math.gamma(a) * math.gamma(c - a) / math.gamma(c))
        t0 = time.perf_counter()
        lhs = (al + be + ga) * s1
        rhs = -be * e0 + X * (al + be) * e1
        out.append(scalar_report(f"classical/three-term-first/point={m}", cp, lhs, rhs,
                                 [lhs, be * e0, X * (al + be) * e1], TOL_SERIES, t0))
        t0 = time.perf_counter()
        pairs = [(be * e0 * norm, f0), (X * (al + be) * e1 * norm, f1), ((al + be + ga) * s1 * norm, k1 * f2)]
        worst = max(abs(u - v) for u, v in pairs)
        out.append(make_report(f"classical/three-term-first-matches-contiguous/point={m}", cp, worst,
                               max(abs(v) for _, v in pairs), TOL_SERIES, t0))
        t0 = time.perf_counter()
        lhs = ga * s1 + (al + be) * s0
        rhs = al * e0
        out.append(scalar_report(f"classical/three-term-second/point={m}", cp, lhs, rhs,
                                 [ga * s1, (al + be) * s0, al * e0], TOL_SERIES, t0))
        t0 = time.perf_counter()
        norm2 = 1 / (X ** (-b) * math.gamma(a) * math.gamma(c - a) / math.gamma(c) * a)
        pairs = [(al * e0 * norm2, f0), ((al + be) * s0 * norm2, g1), (-ga * s1 * norm2, k2 * f2)]
        worst = max(abs(u - v) for u, v in pairs)
        out.append(make_report(f"classical/three-term-second-matches-contiguous/point={m}", cp, worst,
                               max(abs(v) for _, v in pairs), TOL_SERIES, t0))
        # the n = 1 matrix system and its two product forms
        t0 = time.perf_counter()
        cp1 = ClassicalParams(al, be, ga, 1.0, X, 1)
        M = gauss.build_classical_M(cp1).product()
        row = np.array([e0, e1])
        pred = row @ M
        terms = [abs(row[k] * M[k, j]) for k in range(2) for j in range(2)]
        out.append(make_report(f"classical/n1-system/point={m}", cp1, float(np.max(np.abs(pred - np.array([s0, s1])))),
                               max(terms), TOL_SERIES, t0))
        t0 = time.perf_counter()
        Ma = np.array([[al + ga, 0], [-X * ga, X * al]]) @ np.linalg.inv([[al + be + ga, be], [0, al + ga]])
        Mb = np.array([[al, -be], [0, X * (al + be)]]) @ np.linalg.inv([[al + be, 0], [ga, al + be + ga]])
        worst = max(float(np.max(np.abs(Ma - M))), float(np.max(np.abs(Mb - M))))
        out.append(make_report(f"classical/n1-matrix-product-forms/point={m}", cp1, worst,
                               float(np.max(np.abs(M))), TOL_RATIONAL, t0))
    return out


# --------------------------------------------------------------------------
# suites

def sample_integral_params(rng, n: int, max_attempts: int = 100) -> Params:
    """Generic parameters inside the convergence region, with fast lattice decay."""
    for _ in range(max_attempts):
        def ph():
            return complex(np.exp(1j * rng.uniform(-0.5, 0.5)))

        p = Params(q=complex(rng.uniform(0.25, 0.35)), t=rng.uniform(0.8, 0.9) * ph(),
                   qalpha=rng.uniform(0.45, 0.6) * ph(), a1=rng.uniform(2.2, 2.8) * ph(),
                   a2=rng.uniform(2.2, 2.8) * ph(), b1=rng.uniform(2.2, 2.8) * ph(),
                   b2=rng.uniform(2.2, 2.8) * ph(), n=n)
        if jackson.check_convergence(p) and check_generic(p).passed:
            return p
    raise RuntimeError("no convergent generic parameter point found")


def _suite_tasks(suite: str, seeds: int, seed: int, n_max):
    """[(label, callable)] in a fixed order."""
    tasks = []
    if suite in ("matrices", "all"):
        top = 8 if n_max is None else n_max
        for s in range(seeds):
            for n in range(1, top + 1):
                def job(s=s, n=n):
                    rng = np.random.default_rng([seed, s, n, 1])
                    p = sample_generic(rng, n)
                    return p, verify_matrix_identities(p)
                tasks.append(job)
    if suite in ("polynomials", "all"):
        top = 4 if n_max is None else min(n_max, 4)
        for s in range(seeds):
            for n in range(1, top + 1):
                def job(s=s, n=n):
                    rng = np.random.default_rng([seed, s, n, 2])
                    p = sample_generic(rng, n)
                    return p, verify_polynomial_identities(p, rng)
                tasks.append(job)
    for n, name in ((1, "integrals-n1"), (2, "integrals-n2")):
        if suite == name or (suite == "all" and (n_max is None or n <= n_max)):
            for s in range(seeds):
                def job(s=s, n=n):
                    rng = np.random.default_rng([seed, s, n, 3])
                    p = sample_integral_params(rng, n)
                    xi = jackson.default_xi(p, rng)
                    return p, verify_integrals(p, xi)
                tasks.append(job)
    if suite in ("classical", "all"):
        def job():
            rng = np.random.default_rng([seed, 4])
            return None, verify_classical(rng)
        tasks.append(job)
    return tasks


def run_suite(suite: str, seeds: int = 1, seed: int = 0, n_max=None, deterministic: bool = True,
              threads: int = 1) -> dict:
    """Run a named suite and return the JSON-ready SuiteReport."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    tasks = _suite_tasks(suite, seeds, seed, n_max) if suite != "none" else []
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda f: f(), tasks))
    else:
        results = [f() for f in tasks]
    reports, params = [], []
    for p, reps in results:
        if p is not None:
            params.append(p.to_json())
        reports.extend(reps)
    reports.sort(key=lambda r: r.identity_id)  # stable: ties keep task order
    if deterministic:
        for r in reports:
            r.runtime_ms = 0.0
    passed = sum(r.passed for r in reports)
    return {"suite": suite, "seed": seed, "params": params, "reports": [r.to_json() for r in reports],
            "summary": {"total": len(reports), "passed": passed, "failed": len(reports) - passed}}


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1, allow_nan=True)


__all__ = [
    "IdentityReport", "verify_decompositions", "verify_direct_R", "verify_inverses", "verify_determinants",
    "verify_intermediate_products", "verify_pointwise_transitions", "verify_matrix_identities",
    "verify_polynomial_identities", "verify_FG", "verify_nabla_expansions", "verify_three_term",
    "verify_difference_systems", "verify_nabla_vanishing", "verify_integrals", "verify_classical", "verify_classical_M",
    "sample_classical", "hyp2f1",
    "classical_brackets", "sample_integral_params", "run_suite", "dumps_report", "SUITES", "chain_scale",
]
