"""Closed-form Gauss decompositions of the transition matrix R, the coefficient
matrix A and the classical matrix M, together with their inverses, the
intermediate transition matrices and the determinant formulas.

Every matrix entry is produced by a small function of (p, i, j); matrices are
filled from those functions.  Denominators go through ``qpoch_den``/``den`` so
that :func:`sweep_all_formulas` can audit them for genericity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, DivisionByZero, IndexOutOfRange, NonGeneric, Unsupported
from .qcore import Params, cnum, czeros, den, qbinom, qpoch, qpoch_den, to_pair


def C2(x: int) -> int:
    return x * (x - 1) // 2


def _qb(i, j, c, label=None):
    """q-binomial; when it sits in a denominator its value is audited."""
    val = qbinom(i, j, c)
    if label is not None:
        val = den(val, label)
    return val


# --------------------------------------------------------------------------
# containers

@dataclass
class GaussFactorization:
    """Triangular factors.  ``order`` 'LDU' multiplies lower @ diag @ upper,
    'UDL' multiplies upper @ diag @ lower."""

    name: str
    order: str
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def product(self) -> np.ndarray:
        if self.order == "LDU":
            return self.lower @ self.diag @ self.upper
        return self.upper @ self.diag @ self.lower

    def det(self):
        out = cnum(1)
        for v in np.diagonal(self.diag):
            out = out * v
        return out

    def to_json(self, params=None) -> dict:
        out = {"matrix": self.name, "order": self.order, "n": int(self.diag.shape[0]) - 1,
               "lower": matrix_to_json(self.lower), "diag": matrix_to_json(self.diag),
               "upper": matrix_to_json(self.upper), "product": matrix_to_json(self.product())}
        if params is not None:
            out["params"] = params.to_json()
        return out


def matrix_to_json(m) -> list:
    return [[to_pair(v) for v in row] for row in np.asarray(m)]


def _fill(n, entry, part):
    """(n+1)x(n+1) matrix with entry(i, j) on the 'lower', 'upper' or 'diag' part."""
    m = czeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            if (part == "lower" and i >= j) or (part == "upper" and i <= j) or (part == "diag" and i == j):
                m[i, j] = entry(i, j)
    return m


def _diag(n, entry):
    return _fill(n, lambda i, j: entry(j), "diag")


def _unpack(p: Params):
    p = p.coerced()
    return p, p.n, p.t, p.qalpha, p.a1, p.a2, p.b1, p.b2


# --------------------------------------------------------------------------
# R: transition matrix between the two Matsuo bases

def R_factor_entries(p: Params):
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    ti = 1 / t

    def l(i, j):
        return (_qb(n - j, n - i, ti) * (-1) ** (i - j) * t ** (-C2(i - j)) * qpoch(a2 * b2 * t ** j, t, i - j)
                / qpoch_den(a2 / a1 * t ** (-(n - 2 * j - 1)), t, i - j, "l^R"))

    def d(j):
        return (qpoch(a1 / a2 * t ** (-j), t, n - j) * qpoch(a2 * b1, t, j)
                / (qpoch_den(a1 * b2, t, n - j, "d^R") * qpoch_den(a2 / a1 * t ** (-(n - j)), t, j, "d^R")))

    def u(i, j):
        return (_qb(j, i, ti) * qpoch(a1 * b1 * t ** (n - j), t, j - i)
                / qpoch_den(a1 / a2 * t ** (n - i - j), t, j - i, "u^R"))

    def u_(i, j):
        return (_qb(j, i, t) * (-1) ** (j - i) * t ** C2(j - i) * qpoch(1 / (a1 * b1) * t ** (-(n - i - 1)), t, j - i)
                / qpoch_den(b2 / b1 * t ** (i + j - n), t, j - i, "u'^R"))

    def d_(j):
        return (qpoch(b1 / b2 * t ** (n - 2 * j + 1), t, j) * qpoch(1 / (a2 * b1) * t ** (-(n - j - 1)), t, n - j)
                / (qpoch_den(1 / (a1 * b2) * t ** (-(j - 1)), t, j, "d'^R")
                   * qpoch_den(b2 / b1 * t ** (-(n - 2 * j - 1)), t, n - j, "d'^R")))

    def l_(i, j):
        return (_qb(n - j, n - i, t) * qpoch(1 / (a2 * b2) * t ** (-(i - 1)), t, i - j)
                / qpoch_den(b1 / b2 * t ** (n - 2 * i + 1), t, i - j, "l'^R"))

    return n, dict(l=l, d=d, u=u, u_=u_, d_=d_, l_=l_)


def build_R_factors(p: Params, order: str = "LDU") -> GaussFactorization:
    """R = L_R D_R U_R (order 'LDU') or U'_R D'_R L'_R (order 'UDL')."""
    n, e = R_factor_entries(p)
    order = order.upper()
    if order == "LDU":
        return GaussFactorization("R", "LDU", _fill(n, e["l"], "lower"), _diag(n, e["d"]), _fill(n, e["u"], "upper"))
    if order == "UDL":
        return GaussFactorization("R", "UDL", _fill(n, e["l_"], "lower"), _diag(n, e["d_"]), _fill(n, e["u_"], "upper"))
    raise ValueError(f"order must be LDU or UDL, got {order!r}")


def R_inverse_entries(p: Params):
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    ti = 1 / t

    def l(i, j):
        return (_qb(n - j, n - i, ti) * qpoch(a2 * b2 * t ** j, t, i - j)
                / qpoch_den(a2 / a1 * t ** (i + j - n), t, i - j, "l^R*"))

    def d(j):
        return (qpoch(a2 / a1 * t ** (-(n - j)), t, j) * qpoch(a1 * b2, t, n - j)
                / (qpoch_den(a2 * b1, t, j, "d^R*") * qpoch_den(a1 / a2 * t ** (-j), t, n - j, "d^R*")))

    def u(i, j):
        return ((-1) ** (j - i) * t ** (-C2(j - i)) * _qb(j, i, ti) * qpoch(a1 * b1 * t ** (n - j), t, j - i)
                / qpoch_den(a1 / a2 * t ** (n - 2 * j + 1), t, j - i, "u^R*"))

    def u_(i, j):
        return (_qb(j, i, t) * qpoch(1 / (a1 * b1) * t ** (-(n - i - 1)), t, j - i)
                / qpoch_den(b2 / b1 * t ** (-(n - 2 * i - 1)), t, j - i, "u'^R*"))

    def d_(j):
        return (qpoch(b2 / b1 * t ** (-(n - 2 * j - 1)), t, n - j) * qpoch(1 / (a1 * b2) * t ** (-(j - 1)), t, j)
                / (qpoch_den(1 / (a2 * b1) * t ** (-(n - j - 1)), t, n - j, "d'^R*")
                   * qpoch_den(b1 / b2 * t ** (n - 2 * j + 1), t, j, "d'^R*")))

    def l_(i, j):
        return ((-1) ** (i - j) * t ** C2(i - j) * _qb(n - j, n - i, t) * qpoch(1 / (a2 * b2) * t ** (-(i - 1)), t, i - j)
                / qpoch_den(b1 / b2 * t ** (n - i - j), t, i - j, "l'^R*"))

    return n, dict(l=l, d=d, u=u, u_=u_, d_=d_, l_=l_)


def build_R_inverse(p: Params, order: str = "UDL") -> GaussFactorization:
    """R^{-1} = U_R^{-1} D_R^{-1} L_R^{-1} ('UDL') or L'_R^{-1} D'_R^{-1} U'_R^{-1} ('LDU')."""
    n, e = R_inverse_entries(p)
    order = order.upper()
    if order == "UDL":
        return GaussFactorization("Rinv", "UDL", _fill(n, e["l"], "lower"), _diag(n, e["d"]), _fill(n, e["u"], "upper"))
    if order == "LDU":
        return GaussFactorization("Rinv", "LDU", _fill(n, e["l_"], "lower"), _diag(n, e["d_"]), _fill(n, e["u_"], "upper"))
    raise ValueError(f"order must be LDU or UDL, got {order!r}")


def build_R_direct(p: Params) -> np.ndarray:
    """R by evaluating both Matsuo bases at the points zeta_i(a1, 1/b2).

    At zeta_i the basis e_m(a1,b2) collapses to c_i delta_{mi}, so row i of R is
    (e_n(a2,b1), ..., e_0(a2,b1)) at zeta_i divided by c_i.
    """
    from . import interp

    p = p.coerced()
    n = p.n
    t = p.t
    R = czeros((n + 1, n + 1))
    for i in range(n + 1):
        z = interp.materialize(interp.SpecialPoint("zeta", i, p.a1, 1 / p.b2), p)
        ci = interp.etilde(0, i, p.a1, p.b2, t, z)
        ci = den(ci, f"c_{i}")
        for j in range(n + 1):
            R[i, j] = interp.etilde(0, n - j, p.a2, p.b1, t, z) / ci
    return R


def build_K(p: Params, which: int) -> np.ndarray:
    """Coefficient matrix of the q-shift a_r -> q a_r, b_r -> b_r/q (r = which)."""
    p = p.coerced()
    n = p.n
    s = p.qalpha * p.t ** (n - 1)
    if which == 1:
        D1 = _diag(n, lambda i: s ** (n - i))
        return build_R_inverse(p).product() @ D1
    if which == 2:
        D2 = _diag(n, lambda i: s ** i)
        return D2 @ build_R_factors(p.shift_ab(2)).product()
    raise ValueError(f"which must be 1 or 2, got {which}")


# --------------------------------------------------------------------------
# A: coefficient matrix of the shift alpha -> alpha + 1

def A_factor_entries(p: Params):
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    P = a1 * a2 * b1 * b2

    def l(i, j):
        return ((-1) ** (i - j) * t ** (C2(n - i) - C2(n - j)) * _qb(n - j, n - i, t)
                * qpoch(a2 * b2 * t ** j, t, i - j) / qpoch_den(Q * a2 * b2 * t ** (2 * j), t, i - j, "l^A"))

    def d(j):
        return (a1 ** (n - j) * a2 ** j * t ** (C2(j) + C2(n - j)) * qpoch(Q, t, j)
                * qpoch(Q * a2 * b2 * t ** (2 * j), t, n - j)
                / (qpoch_den(Q * a2 * b2 * t ** (j - 1), t, j, "d^A")
                   * qpoch_den(Q * P * t ** (n + j - 1), t, n - j, "d^A")))

    def u(i, j):
        return ((-Q * a2 / a1) ** (j - i) * t ** (C2(j) - C2(i)) * _qb(j, i, t)
                * qpoch(a1 * b1 * t ** (n - j), t, j - i) / qpoch_den(Q * a2 * b2 * t ** (2 * i), t, j - i, "u^A"))

    def u_(i, j):
        return ((-Q) ** (j - i) * t ** (C2(n - i) - C2(n - j)) * _qb(j, i, t)
                * qpoch(a1 * b1 * t ** (n - j), t, j - i)
                / qpoch_den(Q * a1 * b1 * t ** (2 * (n - j)), t, j - i, "u'^A"))

    def d_(j):
        return (a1 ** (n - j) * a2 ** j * t ** (C2(j) + C2(n - j))
                * qpoch(Q * a1 * b1 * t ** (2 * (n - j)), t, j) * qpoch(Q, t, n - j)
                / (qpoch_den(Q * P * t ** (2 * n - j - 1), t, j, "d'^A")
                   * qpoch_den(Q * a1 * b1 * t ** (n - j - 1), t, n - j, "d'^A")))

    def l_(i, j):
        return ((-a1 / a2) ** (i - j) * t ** (C2(j) - C2(i)) * _qb(n - j, n - i, t)
                * qpoch(a2 * b2 * t ** j, t, i - j)
                / qpoch_den(Q * a1 * b1 * t ** (2 * (n - i)), t, i - j, "l'^A"))

    return n, dict(l=l, d=d, u=u, u_=u_, d_=d_, l_=l_)


def build_A_factors(p: Params, order: str = "LDU") -> GaussFactorization:
    """A = L_A D_A U_A ('LDU') or U'_A D'_A L'_A ('UDL')."""
    n, e = A_factor_entries(p)
    order = order.upper()
    if order == "LDU":
        return GaussFactorization("A", "LDU", _fill(n, e["l"], "lower"), _diag(n, e["d"]), _fill(n, e["u"], "upper"))
    if order == "UDL":
        return GaussFactorization("A", "UDL", _fill(n, e["l_"], "lower"), _diag(n, e["d_"]), _fill(n, e["u_"], "upper"))
    raise ValueError(f"order must be LDU or UDL, got {order!r}")


# --------------------------------------------------------------------------
# intermediate transition matrices

def _intermediate_entries(p: Params):
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    P = a1 * a2 * b1 * b2
    ti = 1 / t
    norm_ti = qpoch(ti, ti, n) / (1 - ti) ** n
    norm_t = qpoch(t, t, n) / (t ** C2(n) * (1 - t) ** n)

    def Ltilde(i, j):
        return (_qb(n - j, n - i, t) * (-1) ** (i - j) * a1 ** (n - j) * t ** C2(n - i)
                * qpoch(a2 * b2 * t ** j, t, i - j) * qpoch(Q * a2 * b2 * t ** (i + j), t, n - i)
                / qpoch_den(Q * P * t ** (n + j - 1), t, n - j, "Ltilde"))

    def Utilde(i, j):
        return (_qb(j, i, t) * (-Q / a1) ** (j - i) * a2 ** j * t ** C2(j) * qpoch(Q, t, i)
                * qpoch(a1 * b1 * t ** (n - j), t, j - i)
                / (qpoch_den(Q * a2 * b2 * t ** (i - 1), t, i, "Utilde")
                   * qpoch_den(Q * a2 * b2 * t ** (2 * i), t, j - i, "Utilde")))

    def Vtilde(i, j):
        return (_qb(j, i, t) * (Q / a1 * t ** (j - 1)) ** (j - i) * t ** (C2(i) - C2(j - i))
                * qpoch(a1 * b1 * t ** (n - j), t, j - i) * qpoch(Q * a2 * b2 * t ** (j - 1), t, i)
                / ((a2 * t ** (j - 1)) ** i * qpoch_den(Q, t, j, "Vtilde")))

    def UAinv(i, j):
        return ((Q * a2 / a1 * t ** (j - 1)) ** (j - i) * _qb(j, i, t) * qpoch(a1 * b1 * t ** (n - j), t, j - i)
                / qpoch_den(Q * a2 * b2 * t ** (j + i - 1), t, j - i, "UAinv"))

    def LprimeAinv(i, j):
        return (_qb(n - j, n - i, t) * (a1 / a2 * t ** (-j)) ** (i - j) * qpoch(a2 * b2 * t ** j, t, i - j)
                / qpoch_den(Q * a1 * b1 * t ** (2 * n - i - j - 1), t, i - j, "LprimeAinv"))

    def Utilde_R(i, j):
        return (qpoch(a1 * b1 * t ** (n - j), t, j - i) * qpoch(a1 / a2 * t ** (-i), t, n - j)
                * qpoch(a2 * b1, t, i) * norm_ti * _qb(j, i, ti) / _qb(n, i, ti, "Utilde_R qbinom"))

    def Ltilde_R(i, j):
        return ((-1) ** (i - j) * t ** (-C2(i - j)) * qpoch(a2 * b2 * t ** j, t, i - j)
                / (qpoch_den(a2 / a1 * t ** (-(n - 2 * j - 1)), t, i - j, "Ltilde_R")
                   * qpoch_den(a1 * b2, t, n - j, "Ltilde_R")
                   * qpoch_den(a2 / a1 * t ** (-(n - j)), t, j, "Ltilde_R") * norm_ti)
                * _qb(n, i, ti) * _qb(i, j, ti))

    def LtildePrime_R(i, j):
        return (qpoch(1 / (a2 * b2) * t ** (-(i - 1)), t, i - j) * qpoch(1 / (a2 * b1) * t ** (-(n - i - 1)), t, n - i)
                * qpoch(b1 / b2 * t ** (n - i - j + 1), t, j) * norm_t
                * _qb(i, j, t) / _qb(n, j, t, "LtildePrime_R qbinom"))

    def UtildePrime_R(i, j):
        return ((-1) ** (j - i) * t ** C2(j - i) * qpoch(1 / (a1 * b1) * t ** (-(n - i - 1)), t, j - i)
                / (qpoch_den(b2 / b1 * t ** (-(n - i - j)), t, j - i, "UtildePrime_R")
                   * qpoch_den(b2 / b1 * t ** (-(n - 2 * j - 1)), t, n - j, "UtildePrime_R")
                   * qpoch_den(1 / (a1 * b2) * t ** (-(j - 1)), t, j, "UtildePrime_R") * norm_t)
                * _qb(n, j, t) * _qb(j, i, t))

    def UtildePrime_app(i, j):
        return ((-Q * t ** (n - 1)) ** (j - i) * a2 ** j * t ** C2(i) * _qb(j, i, t)
                * qpoch(a1 * b1 * t ** (n - j), t, j - i) * qpoch(Q * a1 * b1 * t ** (2 * n - i - j), t, i)
                / qpoch_den(Q * P * t ** (2 * n - j - 1), t, j, "UtildePrime_app"))

    def LtildePrime_app(i, j):
        return ((-1) ** (i - j) * _qb(n - j, n - i, t) * a1 ** (n - j) * a2 ** (-(i - j))
                * t ** (C2(n - i) + C2(j) - C2(i)) * qpoch(Q, t, n - i) * qpoch(a2 * b2 * t ** j, t, i - j)
                / (qpoch_den(Q * a1 * b1 * t ** (n - i - 1), t, n - i, "LtildePrime_app")
                   * qpoch_den(Q * a1 * b1 * t ** (2 * (n - i)), t, i - j, "LtildePrime_app")))

    return n, {
        "Ltilde": (Ltilde, "lower"), "Utilde": (Utilde, "upper"), "Vtilde": (Vtilde, "upper"),
        "UAinv": (UAinv, "upper"), "LprimeAinv": (LprimeAinv, "lower"),
        "Ltilde_R": (Ltilde_R, "lower"), "Utilde_R": (Utilde_R, "upper"),
        "LtildePrime_R": (LtildePrime_R, "lower"), "UtildePrime_R": (UtildePrime_R, "upper"),
        "UtildePrime_app": (UtildePrime_app, "upper"), "LtildePrime_app": (LtildePrime_app, "lower"),
    }


INTERMEDIATES = ("Ltilde", "Utilde", "Vtilde", "UAinv", "LprimeAinv", "Ltilde_R", "Utilde_R",
                 "LtildePrime_R", "UtildePrime_R", "UtildePrime_app", "LtildePrime_app")


def build_intermediate(p: Params, which: str) -> np.ndarray:
    """One of the triangular transition matrices named in :data:`INTERMEDIATES`."""
    n, table = _intermediate_entries(p)
    if which not in table:
        raise ValueError(f"unknown intermediate matrix {which!r}; choose from {INTERMEDIATES}")
    entry, part = table[which]
    return _fill(n, entry, part)


# --------------------------------------------------------------------------
# multi-step coefficients of the three-term relations

def _coeff_range(which, n, k, i, l, j):
    ok = 0 <= j <= l and 0 <= k <= n and 0 <= i <= n
    if which == "L":
        ok = ok and i + k <= n and l <= k
    elif which == "U":
        ok = ok and i + k >= n and l <= k + i - n and j <= i
    elif which == "V":
        ok = ok and i + k >= n and k + l <= n and j <= i
    elif which == "Uprime_app":
        ok = ok and k <= i and l <= k and j <= i
    elif which == "Lprime_app":
        ok = ok and k >= i and l <= k - i
    else:
        raise ValueError(f"unknown coefficient family {which!r}")
    if not ok:
        raise IndexOutOfRange(f"{which} coefficient undefined at n={n}, k={k}, i={i}, l={l}, j={j}")


def corollary42_coeff(p: Params, which: str, k: int, i: int, l: int, j: int):
    """Closed-form l-step expansion coefficient.

    L: <E~_{k,i}> -> <E~_{k-l,i+j}>     U: -> <E~_{k-l+j,i-j}>     V: -> <E~_{k+l,i-j}>
    Uprime_app: <E~'_{k,i}> -> <E~'_{k-l,i-j}>     Lprime_app: -> <E~'_{k-l+j,i+j}>
    """
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    _coeff_range(which, n, k, i, l, j)
    P = a1 * a2 * b1 * b2
    qb = qbinom(l, j, t)
    if which == "L":
        return (qb * (-1) ** j * (a1 * t ** (n - i - k)) ** l * t ** C2(l - j) * qpoch(a2 * b2 * t ** i, t, j)
                * qpoch(Q * a2 * b2 * t ** (n + i + j - k), t, l - j)
                / qpoch_den(Q * P * t ** (2 * n - k - 1), t, l, "L coeff"))
    if which == "U":
        return (qb * (-Q / a1 * t ** (i - l)) ** j * (a2 * t ** (n - k)) ** l * t ** C2(l)
                * qpoch(a1 * b1 * t ** (n - i), t, j) * qpoch(Q * t ** (n - k), t, l - j)
                / (qpoch_den(Q * a2 * b2 * t ** (n + i - k - j - 1), t, l - j, "U coeff")
                   * qpoch_den(Q * a2 * b2 * t ** (n + i - k - 2 * j + l), t, j, "U coeff")))
    if which == "V":
        return (qb * (Q / a1 * t ** (i - 1)) ** j * t ** (C2(l - j) - C2(j)) * qpoch(a1 * b1 * t ** (n - i), t, j)
                * qpoch(Q * a2 * b2 * t ** (n + i - k - l - 1), t, l - j)
                / ((a2 * t ** (n - k - 1)) ** (l - j) * qpoch_den(Q * t ** (n - k - l), t, l, "V coeff")))
    if which == "Uprime_app":
        return ((-Q * t ** (n - k + l - 1)) ** j * (a2 * t ** (k - l)) ** l * t ** C2(l - j) * qb
                * qpoch(a1 * b1 * t ** (n - i), t, j) * qpoch(Q * a1 * b1 * t ** (2 * n - k - i + j), t, l - j)
                / qpoch_den(Q * P * t ** (2 * n - k - 1), t, l, "U' coeff"))
    return (qb * (-1 / a2 * t ** (-(k - 1))) ** j * (a1 * t ** (k - i - 1)) ** l * t ** (-C2(l))
            * qpoch(Q * t ** (n - k), t, l - j) * qpoch(a2 * b2 * t ** i, t, j)
            / (qpoch_den(Q * a1 * b1 * t ** (2 * n - k - i - j - 1), t, l - j, "L' coeff")
               * qpoch_den(Q * a1 * b1 * t ** (2 * n - k - i - 2 * j + l), t, j, "L' coeff")))


def _one_step(p: Params, which: str, k: int, i: int) -> dict:
    """One application of a three-term relation, as {(k', i'): coefficient}."""
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    P = a1 * a2 * b1 * b2
    if which == "L":
        if not (i + k <= n and k >= 1):
            raise IndexOutOfRange
        f = a1 * t ** (n - i - k) / (1 - Q * P * t ** (2 * n - k - 1))
        return {(k - 1, i): f * (1 - Q * a2 * b2 * t ** (n + i - k)), (k - 1, i + 1): -f * (1 - a2 * b2 * t ** i)}
    if which == "U":
        if not (i + k - 1 >= n and i >= 1):
            raise IndexOutOfRange
        f = a2 / (1 - Q * a2 * b2 * t ** (n + i - 1 - k))
        return {(k - 1, i): f * t ** (n - k) * (1 - Q * t ** (n - k)),
                (k, i - 1): -f / a1 * Q * t ** (n + i - 1 - k) * (1 - a1 * b1 * t ** (n - i))}
    if which == "V":
        if not (i + k >= n and k + 1 <= n):
            raise IndexOutOfRange
        f = 1 / (t ** (n - k - 1) * (1 - Q * t ** (n - k - 1)))
        out = {(k + 1, i): f / a2 * (1 - Q * a2 * b2 * t ** (n + i - k - 2))}
        if i >= 1:
            out[(k + 1, i - 1)] = f / a1 * Q * t ** (n + i - k - 2) * (1 - a1 * b1 * t ** (n - i))
        return out
    if which == "Uprime_app":
        if not (k <= i and k >= 1):
            raise IndexOutOfRange
        f = a2 / (1 - Q * P * t ** (2 * n - k - 1))
        out = {(k - 1, i): f * t ** (k - 1) * (1 - Q * a1 * b1 * t ** (2 * n - k - i))}
        if i >= 1:
            out[(k - 1, i - 1)] = -f * Q * t ** (n - 1) * (1 - a1 * b1 * t ** (n - i))
        return out
    if which == "Lprime_app":
        if not (k >= i + 1):
            raise IndexOutOfRange
        f = a1 / (1 - Q * a1 * b1 * t ** (2 * n - k - i - 1))
        return {(k - 1, i): f * t ** (k - i - 1) * (1 - Q * t ** (n - k)),
                (k, i + 1): -f / a2 * t ** (-i) * (1 - a2 * b2 * t ** i)}
    raise ValueError(f"unknown coefficient family {which!r}")


def corollary42_coeff_by_recursion(p: Params, which: str, k: int, i: int, l: int, j: int):
    """The same coefficient obtained by iterating the one-step relations l times."""
    _coeff_range(which, p.n, k, i, l, j)
    level = {(k, i): cnum(1)}
    for _ in range(l):
        nxt = {}
        for (kk, ii), c in level.items():
            for key, v in _one_step(p, which, kk, ii).items():
                nxt[key] = nxt.get(key, 0) + c * v
        level = nxt
    target = {"L": (k - l, i + j), "U": (k - l + j, i - j), "V": (k + l, i - j),
              "Uprime_app": (k - l, i - j), "Lprime_app": (k - l + j, i + j)}[which]
    return level.get(target, cnum(0))


# --------------------------------------------------------------------------
# classical matrix M

@dataclass(frozen=True)
class ClassicalParams:
    alpha: float
    beta: float
    gamma: float
    tau: float
    x: float
    n: int = 1

    def to_json(self) -> dict:
        return {"alpha": to_pair(self.alpha), "beta": to_pair(self.beta), "gamma": to_pair(self.gamma),
                "tau": to_pair(self.tau), "x": to_pair(self.x), "n": int(self.n)}

    @classmethod
    def from_json(cls, data: dict) -> "ClassicalParams":
        from .qcore import from_pair
        kw = {k: from_pair(data[k]) for k in ("alpha", "beta", "gamma", "tau", "x")}
        return cls(n=int(data.get("n", 1)), **kw)


def apoch(x, tau, i: int):
    """(x; tau)_i = x (x + tau) ... (x + (i-1) tau)."""
    out = cnum(1)
    for k in range(i):
        out *= x + k * tau
    return out


def _apoch_den(x, tau, i, label):
    val = apoch(x, tau, i)
    if val == 0:
        raise Degenerate(f"vanishing Pochhammer denominator in {label}: ({x}; {tau})_{i}")
    return val


def _binom(a, b):
    from math import comb
    return comb(a, b) if 0 <= b <= a else 0


def build_classical_M(cp: ClassicalParams, order: str = "LDU") -> GaussFactorization:
    """The q -> 1 coefficient matrix M in either Gauss decomposition."""
    al, be, ga, tau, x = (cnum(v) for v in (cp.alpha, cp.beta, cp.gamma, cp.tau, cp.x))
    n = cp.n
    order = order.upper()
    if order == "LDU":
        def l(i, j):
            return ((-x) ** (i - j) * _binom(n - j, n - i) * apoch(ga + j * tau, tau, i - j)
                    / _apoch_den(al + ga + 2 * j * tau, tau, i - j, "l"))

        def d(j):
            return (x ** j * apoch(al, tau, j) * apoch(al + ga + 2 * j * tau, tau, n - j)
                    / (_apoch_den(al + ga + (j - 1) * tau, tau, j, "d")
                       * _apoch_den(al + be + ga + (n + j - 1) * tau, tau, n - j, "d")))

        def u(i, j):
            return ((-1) ** (j - i) * _binom(j, i) * apoch(be + (n - j) * tau, tau, j - i)
                    / _apoch_den(al + ga + 2 * i * tau, tau, j - i, "u"))

        return GaussFactorization("M", "LDU", _fill(n, l, "lower"), _diag(n, d), _fill(n, u, "upper"))
    if order == "UDL":
        def u_(i, j):
            return ((-1 / x) ** (j - i) * _binom(j, i) * apoch(be + (n - j) * tau, tau, j - i)
                    / _apoch_den(al + be + 2 * (n - j) * tau, tau, j - i, "u'"))

        def d_(j):
            return (x ** j * apoch(al + be + 2 * (n - j) * tau, tau, j) * apoch(al, tau, n - j)
                    / (_apoch_den(al + be + ga + (2 * n - j - 1) * tau, tau, j, "d'")
                       * _apoch_den(al + be + (n - j - 1) * tau, tau, n - j, "d'")))

        def l_(i, j):
            return ((-1) ** (i - j) * _binom(n - j, n - i) * apoch(ga + j * tau, tau, i - j)
                    / _apoch_den(al + be + 2 * (n - i) * tau, tau, i - j, "l'"))

        return GaussFactorization("M", "UDL", _fill(n, l_, "lower"), _diag(n, d_), _fill(n, u_, "upper"))
    raise ValueError(f"order must be LDU or UDL, got {order!r}")


# --------------------------------------------------------------------------
# determinants

def det_formula(p, which: str):
    """Closed-form determinant of R, K1, K2, A (Params) or M (ClassicalParams)."""
    if isinstance(p, ClassicalParams):
        if which != "M":
            raise Unsupported("classical parameters only define M")
        return build_classical_M(p).det()
    p, n, t, Q, a1, a2, b1, b2 = _unpack(p)
    N2 = C2(n + 1)
    prod = cnum(1)
    if which == "R":
        for i in range(1, n + 1):
            prod *= qpoch(a2 * b1, t, i) / qpoch_den(a1 * b2, t, i, "det R")
        return (-a1 / a2) ** N2 * prod
    if which == "K1":
        for i in range(1, n + 1):
            prod *= qpoch(a1 * b2, t, i) / qpoch_den(a2 * b1, t, i, "det K1")
        return (-a2 / a1 * Q * t ** (n - 1)) ** N2 * prod
    if which == "K2":
        q = p.q
        for i in range(1, n + 1):
            prod *= qpoch(q * a2 * b1, t, i) / qpoch_den(a1 * b2 / q, t, i, "det K2")
        return (-a1 / a2 * Q / q * t ** (n - 1)) ** N2 * prod
    if which == "A":
        P = a1 * a2 * b1 * b2
        for i in range(1, n + 1):
            prod *= qpoch(Q, t, i) / qpoch_den(Q * P * t ** (2 * n - i - 1), t, i, "det A")
        return (a1 * a2) ** N2 * t ** (2 * (n + 1) * n * (n - 1) // 6) * prod
    raise ValueError(f"unknown determinant {which!r}")


def det_elimination(m) -> complex:
    """Determinant by Gaussian elimination with partial pivoting."""
    a = np.array(m, dtype=object if np.asarray(m).dtype == object else complex, copy=True)
    size = a.shape[0]
    det = cnum(1)
    for c in range(size):
        piv = max(range(c, size), key=lambda r: abs(a[r, c]))
        if a[piv, c] == 0:
            return cnum(0)
        if piv != c:
            a[[c, piv]] = a[[piv, c]]
            det = -det
        det *= a[c, c]
        for r in range(c + 1, size):
            f = a[r, c] / a[c, c]
            a[r, c:] = a[r, c:] - f * a[c, c:]
    return det


# --------------------------------------------------------------------------
# genericity sweep

def sweep_all_formulas(p: Params):
    """Evaluate every entry formula once (used under denominator recording)."""
    for order in ("LDU", "UDL"):
        build_R_factors(p, order)
        build_R_inverse(p, order)
        build_A_factors(p, order)
    build_R_factors(p.shift_ab(2), "LDU")
    for which in INTERMEDIATES:
        build_intermediate(p, which)
    for which in ("R", "K1", "K2", "A"):
        det_formula(p, which)
    # constants c_i of the direct evaluation of R
    from .interp import c_const
    pc = p.coerced()
    for i in range(p.n + 1):
        den(c_const(i, pc.a1, pc.b2, pc.t, p.n), f"c_{i}")


def require_generic(p: Params):
    """Raise :class:`NonGeneric` naming the first vanishing factor."""
    from .qcore import check_generic
    verdict = check_generic(p)
    if not verdict.passed:
        raise NonGeneric(f"non-generic parameters: vanishing factor {verdict.offending}", verdict)
    return verdict


def relative_matrix_residual(X, Y, scale=None) -> float:
    """max |X - Y| over entries divided by max(scale, max|Y|, 1e-300)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    diff = max(float(abs(v)) for v in (X - Y).ravel())
    ref = scale if scale is not None else max(float(abs(v)) for v in Y.ravel())
    return diff / max(ref, 1e-300)


__all__ = [
    "GaussFactorization", "ClassicalParams", "build_R_factors", "build_R_direct", "build_R_inverse",
    "build_K", "build_A_factors", "build_intermediate", "corollary42_coeff", "corollary42_coeff_by_recursion",
    "build_classical_M", "det_formula", "det_elimination", "sweep_all_formulas", "require_generic",
    "matrix_to_json", "INTERMEDIATES", "DivisionByZero",
]
