"""Point evaluation of the symmetric polynomial families and their special points.

Everything here is vectorised over leading axes: an evaluation point is an
array whose last axis has length n, so a whole lattice of points can be pushed
through one call.  Skew-symmetrization stacks all n! coordinate permutations
along a new axis and reduces with the permutation signs.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapExceeded, NearCoincident, ParseError, Unsupported
from .qcore import Params, carray, cnum, qbinom, qpoch

FACTORIAL_CAP = 8
GAP_TOLERANCE = 1e-8

FAMILIES = ("matsuo", "etilde", "etildeprime", "lagrange", "matsuoprod")


# --------------------------------------------------------------------------
# Vandermonde-type products and skew-symmetrization

@lru_cache(maxsize=None)
def permutations_with_signs(n: int):
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)
    signs = np.empty(len(perms), dtype=np.int8)
    for m, perm in enumerate(perms):
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        signs[m] = -1 if inv % 2 else 1
    return perms, signs


def _as_points(z):
    z = np.asarray(z)
    if z.dtype != object:
        z = z.astype(complex)
    return z


def delta(z):
    """prod_{i<j} (z_i - z_j) over the last axis."""
    z = _as_points(z)
    n = z.shape[-1]
    out = np.ones(z.shape[:-1], dtype=z.dtype) if z.dtype != object else _ones_obj(z.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (z[..., i] - z[..., j])
    return out


def delta_t(z, t):
    """prod_{i<j} (z_i - z_j / t) over the last axis."""
    z = _as_points(z)
    n = z.shape[-1]
    tinv = 1 / cnum(t)
    out = np.ones(z.shape[:-1], dtype=z.dtype) if z.dtype != object else _ones_obj(z.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (z[..., i] - tinv * z[..., j])
    return out


def _ones_obj(shape):
    out = np.empty(shape, dtype=object)
    out.fill(cnum(1))
    return out


def _scalar(x):
    if isinstance(x, np.ndarray) and x.ndim == 0:
        return x[()]
    return x


def skew_symmetrize(f, z, cap: int = FACTORIAL_CAP, vectorized: bool = True, return_scale: bool = False):
    """Alternating sum over S_n of f at permuted coordinates.

    ``f`` receives an array of shape (..., n!, n) when ``vectorized`` and must
    return shape (..., n!); otherwise it is called once per permutation with
    an array of shape (..., n).  With ``return_scale`` the sum of absolute
    values of the individual terms is returned as well.
    """
    z = _as_points(z)
    n = z.shape[-1]
    if n > cap:
        raise CapExceeded(f"skew-symmetrization over S_{n} exceeds cap n <= {cap}")
    perms, signs = permutations_with_signs(n)
    if vectorized:
        terms = f(z[..., perms])
        terms = terms * signs
        total = terms.sum(axis=-1)
        if return_scale:
            return _scalar(total), _scalar(np.abs(terms).sum(axis=-1))
        return _scalar(total)
    total = 0
    scale = 0
    for perm, sgn in zip(perms, signs):
        val = f(z[..., perm])
        total = total + int(sgn) * val
        scale = scale + abs(val)
    if return_scale:
        return _scalar(total), _scalar(scale)
    return _scalar(total)


def min_relative_gap(z) -> float:
    """Smallest pairwise coordinate gap divided by the largest modulus."""
    z = np.asarray(z)
    n = z.shape[-1]
    if n < 2:
        return float("inf")
    zmax = max(float(abs(v)) for v in z.ravel())
    gap = min(float(abs(z[i] - z[j])) for i in range(n) for j in range(i + 1, n))
    return gap / max(zmax, 1e-300)


def check_distinct(z, tol: float = GAP_TOLERANCE):
    z = np.asarray(z)
    if z.ndim == 1 and min_relative_gap(z) < tol:
        raise NearCoincident(f"coordinates nearly coincide (relative gap {min_relative_gap(z):.3e} < {tol})")


# --------------------------------------------------------------------------
# the E-type families (before skew-symmetrization)

def E_ki(k: int, i: int, a, b, t, Z):
    """z_1...z_k Delta(t;z) prod_{j<=n-i}(1 - b z_j) prod_{j>n-i}(1 - z_j/a)."""
    n = Z.shape[-1]
    ainv = 1 / cnum(a)
    out = delta_t(Z, t)
    for j in range(k):
        out = out * Z[..., j]
    for j in range(n - i):
        out = out * (1 - b * Z[..., j])
    for j in range(n - i, n):
        out = out * (1 - ainv * Z[..., j])
    return out


def Eprime_ki(k: int, i: int, a, b, t, Z):
    """As :func:`E_ki` but the monomial is z_{n-k+1}...z_n."""
    n = Z.shape[-1]
    ainv = 1 / cnum(a)
    out = delta_t(Z, t)
    for j in range(n - k, n):
        out = out * Z[..., j]
    for j in range(n - i):
        out = out * (1 - b * Z[..., j])
    for j in range(n - i, n):
        out = out * (1 - ainv * Z[..., j])
    return out


def _abs_factors_scale(k, i, a, b, t, Z, prime):
    """E_{k,i} with every binomial factor replaced by the sum of its monomial moduli."""
    n = Z.shape[-1]
    A = np.abs(Z)
    tinv, ab, ainv = abs(1 / t), abs(b), abs(1 / a)
    out = np.ones(A.shape[:-1])
    for p in range(n):
        for q in range(p + 1, n):
            out = out * (A[..., p] + tinv * A[..., q])
    mono = range(n - k, n) if prime else range(k)
    for j in mono:
        out = out * A[..., j]
    for j in range(n - i):
        out = out * (1 + ab * A[..., j])
    for j in range(n - i, n):
        out = out * (1 + ainv * A[..., j])
    return out


def skew_E(k, i, a, b, t, z, prime=False, return_scale=False):
    """A E_{k,i}(a,b;z) (the numerator of E~_{k,i}); no division by Delta.

    The scale returned with ``return_scale`` bounds every permutation term by
    the moduli of its monomials, so it stays meaningful where the value is 0.
    """
    fam = Eprime_ki if prime else E_ki
    val = skew_symmetrize(lambda Z: fam(k, i, a, b, t, Z), z)
    if not return_scale:
        return val
    z = _as_points(z)
    perms, _ = permutations_with_signs(z.shape[-1])
    scale = _abs_factors_scale(k, i, a, b, t, z[..., perms], prime).sum(axis=-1)
    return val, _scalar(scale)


def etilde(k, i, a, b, t, z, prime=False, return_scale=False):
    """E~_{k,i}(a,b;z) = A E_{k,i} / Delta(z) at a single point or a stack of points."""
    z = _as_points(z)
    if z.ndim == 1:
        check_distinct(z)
    num = skew_E(k, i, a, b, t, z, prime=prime, return_scale=return_scale)
    d = delta(z)
    if return_scale:
        return _scalar(num[0] / d), _scalar(num[1] / abs(d))
    return _scalar(num / d)


def matsuo(i, a, b, t, z, return_scale=False):
    """Matsuo's polynomial e_i(a,b;z) = E~_{0,i}(a,b;z)."""
    return etilde(0, i, a, b, t, z, return_scale=return_scale)


# --------------------------------------------------------------------------
# Lagrange interpolation polynomials of type A

def lagrange_subset(r: int, x1, x2, t, z):
    """f_r(x1,x2;t;z) from its defining sum over r-subsets."""
    z = _as_points(z)
    n = z.shape[-1]
    total = 0
    for I in itertools.combinations(range(1, n + 1), r):
        J = [m for m in range(1, n + 1) if m not in I]
        term = 1
        for k, ik in enumerate(I, start=1):
            node = x2 * t ** (ik - k)
            term = term * (z[..., ik - 1] - node) / (x1 * t ** (k - 1) - node)
        for l, jl in enumerate(J, start=1):
            node = x1 * t ** (jl - l)
            term = term * (z[..., jl - 1] - node) / (x2 * t ** (l - 1) - node)
        total = total + term
    return _scalar(total)


def lagrange_scale(r: int, x1, x2, t, z):
    """Sum over subsets of the term moduli with |z - node| bounded by |z| + |node|."""
    z = _as_points(z)
    n = z.shape[-1]
    A = np.abs(z)
    total = 0.0
    for I in itertools.combinations(range(1, n + 1), r):
        J = [m for m in range(1, n + 1) if m not in I]
        term = 1.0
        for k, ik in enumerate(I, start=1):
            node = x2 * t ** (ik - k)
            term = term * (A[..., ik - 1] + abs(node)) / abs(x1 * t ** (k - 1) - node)
        for l, jl in enumerate(J, start=1):
            node = x1 * t ** (jl - l)
            term = term * (A[..., jl - 1] + abs(node)) / abs(x2 * t ** (l - 1) - node)
        total = total + term
    return _scalar(total)


def lagrange_all(x1, x2, t, z):
    """[f_0, ..., f_n](x1,x2;t;z) by the recurrence in the last variable."""
    z = _as_points(z)
    n = z.shape[-1]
    zero = z[..., 0] * 0 if n else cnum(0)
    level = [zero + 1]
    for m in range(1, n + 1):
        zm = z[..., m - 1]
        nxt = []
        for i in range(m + 1):
            val = zero
            if i >= 1:
                c = x1 * t ** (i - 1) - x2 * t ** (m - i)
                val = val + (zm - x2 * t ** (m - i)) / c * level[i - 1]
            if i <= m - 1:
                c = x2 * t ** (m - i - 1) - x1 * t ** i
                val = val + (zm - x1 * t ** i) / c * level[i]
            nxt.append(val)
        level = nxt
    return [_scalar(v) for v in level]


def lagrange(r: int, x1, x2, t, z, method: str = "recurrence"):
    if method == "recurrence":
        return lagrange_all(x1, x2, t, z)[r]
    if method == "subset":
        return lagrange_subset(r, x1, x2, t, z)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# polynomial specifications

_SLOT_RE = re.compile(r"^(a1|a2|b1|b2|t|q|qalpha)(\^-1)?$")


def resolve_slot(token, p: Params):
    """Value of a slot token such as 'a1', 'b2^-1' or 't^-1' (numbers pass through)."""
    if not isinstance(token, str):
        return cnum(token)
    m = _SLOT_RE.match(token.strip())
    if not m:
        raise ParseError(f"unknown slot token {token!r}")
    val = cnum(getattr(p, m.group(1)))
    return 1 / val if m.group(2) else val


@dataclass(frozen=True)
class PolySpec:
    """One member of a polynomial family.

    ``slots`` name the (a, b) arguments for the E-type families and the
    (x1, x2) nodes for ``lagrange``; ``base`` is the Lagrange base ('t' or
    't^-1').
    """

    family: str
    indices: tuple
    slots: tuple = ("a1", "b2")
    base: str = "t"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParseError(f"unknown family {self.family!r}")
        want = 2 if self.family in ("etilde", "etildeprime") else 1
        if len(self.indices) != want:
            raise ParseError(f"{self.family} takes {want} index(es), got {self.indices}")

    def check_indices(self, n: int):
        for v in self.indices:
            if not 0 <= v <= n:
                raise ParseError(f"index {v} outside 0..{n}")

    def __str__(self):
        idx = ",".join(str(v) for v in self.indices)
        args = ",".join(str(s) for s in self.slots)
        if self.family == "lagrange":
            args += f",{self.base}"
        return f"{self.family}[{idx}]({args})"


_SPEC_RE = re.compile(r"^\s*([a-z]+)\s*\[([^\]]*)\]\s*\(([^)]*)\)\s*$")


def parse_polyspec(text: str) -> PolySpec:
    """Parse ``family[k,i](slotA,slotB)``; lagrange takes an optional third base slot."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ParseError(f"cannot parse polynomial spec {text!r}")
    family, idx, args = m.groups()
    if family not in FAMILIES:
        raise ParseError(f"unknown family {family!r} in {text!r}")
    try:
        indices = tuple(int(v) for v in idx.split(",") if v.strip())
    except ValueError:
        raise ParseError(f"non-integer index in {idx!r}") from None
    slots = [s.strip() for s in args.split(",") if s.strip()]
    base = "t"
    if family == "lagrange" and len(slots) == 3:
        base = slots.pop()
        if base not in ("t", "t^-1"):
            raise ParseError(f"lagrange base must be t or t^-1, got {base!r}")
    if len(slots) != 2:
        raise ParseError(f"expected two slots in {text!r}")
    for s in slots:
        if not _SLOT_RE.match(s):
            raise ParseError(f"unknown slot token {s!r}")
    return PolySpec(family, indices, tuple(slots), base)


def _slot_values(spec: PolySpec, p: Params):
    return resolve_slot(spec.slots[0], p), resolve_slot(spec.slots[1], p)


def eval_numerator(spec: PolySpec, p: Params, z, return_scale=False):
    """The polynomial times Delta(z); no division, safe at coincident points."""
    z = _as_points(z)
    a, b = _slot_values(spec, p)
    t = cnum(p.t)
    fam = spec.family
    if fam in ("etilde", "etildeprime"):
        k, i = spec.indices
        return skew_E(k, i, a, b, t, z, prime=fam == "etildeprime", return_scale=return_scale)
    if fam == "matsuo":
        return skew_E(0, spec.indices[0], a, b, t, z, return_scale=return_scale)
    if fam == "matsuoprod":
        n = z.shape[-1]
        return skew_E(n, spec.indices[0], a, b, t, z, return_scale=return_scale)
    base = t if spec.base == "t" else 1 / t
    d = delta(z)
    val = lagrange(spec.indices[0], a, b, base, z) * d
    if return_scale:
        return val, _scalar(lagrange_scale(spec.indices[0], a, b, base, z) * np.abs(d))
    return val


def eval_poly(spec: PolySpec, p: Params, z, return_scale: bool = False, method: str = "recurrence"):
    """Evaluate the polynomial named by ``spec`` at parameters ``p``."""
    z = _as_points(z)
    a, b = _slot_values(spec, p)
    t = cnum(p.t)
    fam = spec.family
    if fam == "lagrange":
        base = t if spec.base == "t" else 1 / t
        val = lagrange(spec.indices[0], a, b, base, z, method=method)
        if return_scale:
            return val, lagrange_scale(spec.indices[0], a, b, base, z)
        return val
    if fam == "matsuoprod":
        val = etilde(0, spec.indices[0], a, b, t, z, return_scale=return_scale)
        prod = np.prod(z, axis=-1)
        if return_scale:
            return _scalar(val[0] * prod), _scalar(val[1] * abs(prod))
        return _scalar(val * prod)
    if fam == "matsuo":
        k, i = 0, spec.indices[0]
    else:
        k, i = spec.indices
    return etilde(k, i, a, b, t, z, prime=fam == "etildeprime", return_scale=return_scale)


# --------------------------------------------------------------------------
# special points

_KIND_ALIASES = {
    "xi_a1_prefix": "asc_prefix",
    "eta_a2_suffix": "asc_suffix",
    "xi_binv_prefix": "desc_prefix",
    "eta_a_suffix": "asc_suffix",
}


@dataclass(frozen=True)
class SpecialPoint:
    """Geometric-progression point with j structured coordinates.

    kinds
      zeta        (y t^-(j-1), ..., y t^-1, y, x, x t, ..., x t^(n-j-1))
      xi          (x, x s, ..., x s^(j-1), y, y s, ..., y s^(n-j-1)), s = base
      desc_prefix (x t^-(j-1), ..., x, free...)
      asc_prefix  (x, x t, ..., x t^(j-1), free...)
      asc_suffix  (free..., x, x t, ..., x t^(n-j-1))

    ``x`` and ``y`` may be slot tokens ('a', 'b^-1' refer to the polynomial's
    slots; 'a1', 'b2^-1', ... to the parameters) or numbers.
    """

    kind: str
    j: int
    x: object = None
    y: object = None
    free: tuple = field(default_factory=tuple)
    base: str = "t"

    def canonical_kind(self):
        return _KIND_ALIASES.get(self.kind, self.kind)


def _resolve_point_value(v, p: Params, spec: PolySpec | None):
    if isinstance(v, str):
        tok = v.strip()
        if tok in ("a", "b", "a^-1", "b^-1", "x1", "x2"):
            if spec is None:
                raise ParseError(f"token {tok!r} needs a polynomial spec")
            a, b = _slot_values(spec, p)
            val = {"a": a, "x1": a, "b": b, "x2": b}[tok.replace("^-1", "")]
            return 1 / val if tok.endswith("^-1") else val
        return resolve_slot(tok, p)
    return cnum(v)


def materialize(sp: SpecialPoint, p: Params, spec: PolySpec | None = None, check: bool = True):
    """The literal coordinates of a special point, shape (n,)."""
    n = p.n
    j = sp.j
    if not 0 <= j <= n:
        raise ParseError(f"special point index j={j} outside 0..{n}")
    t = cnum(p.t)
    kind = sp.canonical_kind()
    x = _resolve_point_value(sp.x, p, spec) if sp.x is not None else None
    y = _resolve_point_value(sp.y, p, spec) if sp.y is not None else None
    free = [cnum(v) for v in sp.free]
    if kind == "zeta":
        coords = [y * t ** (-(j - 1 - m)) for m in range(j)] + [x * t ** m for m in range(n - j)]
    elif kind == "xi":
        s = t if sp.base == "t" else 1 / t
        coords = [x * s ** m for m in range(j)] + [y * s ** m for m in range(n - j)]
    elif kind == "desc_prefix":
        coords = [x * t ** (-(j - 1 - m)) for m in range(j)] + free[: n - j]
    elif kind == "asc_prefix":
        coords = [x * t ** m for m in range(j)] + free[: n - j]
    elif kind == "asc_suffix":
        coords = free[:j] + [x * t ** m for m in range(n - j)]
    else:
        raise ParseError(f"unknown special point kind {sp.kind!r}")
    if len(coords) != n:
        raise ParseError(f"special point needs {n} coordinates, got {len(coords)} (free coords missing?)")
    z = carray(coords)
    if check:
        check_distinct(z)
    return z


# --------------------------------------------------------------------------
# closed forms

def leading_coefficient(k: int, i: int, a, b, t, n: int):
    """C_{ki}: coefficient of m_(1^(n-k) 2^k) in E~_{k,i}(a,b;z)."""
    ti = 1 / t
    return ((-1) ** n * qpoch(ti, ti, k) * qpoch(ti, ti, n - k)
            / (a ** i * b ** (-(n - i)) * (1 - ti) ** n))


def c_const(i: int, a, b, t, n: int, form: int = 0):
    """c_i = E~_{0,i}(zeta_i(a, 1/b)) in either displayed form."""
    if form == 0:
        return (qpoch(a * b * t ** i, t, n - i) * qpoch(1 / (a * b) * t ** (-(i - 1)), t, i)
                * qpoch(t, t, i) * qpoch(t, t, n - i) / (t ** (n * (n - 1) // 2) * (1 - t) ** n))
    ti = 1 / t
    return (qpoch(a * b, t, n - i) * qpoch(1 / (a * b) * t ** (-(n - 1)), t, i)
            * qpoch(ti, ti, i) * qpoch(ti, ti, n - i) / (1 - ti) ** n)


def _is_token(v, *names):
    return isinstance(v, str) and v.strip() in names


def closed_form(spec: PolySpec, sp: SpecialPoint, p: Params, form: int = 0):
    """Closed-form value of ``spec`` at ``sp`` where a formula is known.

    Raises :class:`Unsupported` for pairs with no closed form.
    """
    n = p.n
    t = cnum(p.t)
    kind = sp.canonical_kind()
    j = sp.j
    fam = spec.family
    if fam in ("matsuo", "etilde"):
        a, b = _slot_values(spec, p)
        k, i = (0, spec.indices[0]) if fam == "matsuo" else spec.indices
        return _closed_form_etilde(k, i, j, a, b, t, n, kind, sp, p, spec, form)
    if fam == "lagrange" and spec.base == "t":
        x1, x2 = _slot_values(spec, p)
        i = spec.indices[0]
        return _closed_form_lagrange(i, j, x1, x2, t, n, kind, sp, p, spec, form)
    raise Unsupported(f"no closed form for {spec} at {sp.kind}")


def _closed_form_etilde(k, i, j, a, b, t, n, kind, sp, p, spec, form):
    ti = 1 / t
    if kind == "zeta" and _is_token(sp.y, "b^-1"):
        if k == 0 and _is_token(sp.x, "a"):
            return c_const(i, a, b, t, n, form) if i == j else cnum(0)
        x = _resolve_point_value(sp.x, p, spec)
        if i + k > n:
            raise Unsupported("E~_{k,i}(zeta_j(x, 1/b)) scaling needs i + k <= n")
        base = (qpoch(x * b * t ** i, t, n - i) * qpoch(x / a, t, i - j) if j <= i else cnum(0))
        if j <= i:
            base = (base * qpoch(1 / (a * b) * t ** (-(j - 1)), t, j) * qpoch(t, t, n)
                    / (t ** (n * (n - 1) // 2) * (1 - t) ** n) * qbinom(i, j, t) / qbinom(n, j, t))
        scale = x ** k * t ** ((n - j) * k - k * (k + 1) // 2)
        return scale * base
    if kind == "zeta" and _is_token(sp.x, "a"):
        y = _resolve_point_value(sp.y, p, spec)
        if j >= i:
            base = (qpoch(y * b * t ** (-(j - i - 1)), t, j - i) * qpoch(y / a * t ** (-(n - 1)), t, i)
                    * qpoch(a * b, t, n - j) * qpoch(ti, ti, n) / (1 - ti) ** n
                    * qbinom(n - i, n - j, ti) / qbinom(n, j, ti))
        else:
            base = cnum(0)
        if k == 0:
            return base
        if n > i + k:
            raise Unsupported("E~_{k,i}(zeta_j(a, y)) scaling needs n <= i + k")
        e = k + j - n
        return y ** e * a ** (n - j) * t ** ((n - j) * (n - j - 1) // 2 - e * (e - 1) // 2) * base
    if kind == "desc_prefix" and _is_token(sp.x, "b^-1"):
        free = [cnum(v) for v in sp.free]
        if i < j:
            return cnum(0)
        if i == j and k == 0:
            prod = cnum(1)
            for zl in free[: n - i]:
                prod *= 1 - zl * b * t ** i
            if form == 0:
                return (t ** (-i * (n - i)) * qpoch(ti, ti, i) * qpoch(ti, ti, n - i) / (1 - ti) ** n
                        * qpoch(1 / (a * b) * t ** (-(i - 1)), t, i) * prod)
            return (qpoch(t, t, i) * qpoch(t, t, n - i) / (t ** (n * (n - 1) // 2) * (1 - t) ** n)
                    * qpoch(1 / (a * b) * t ** (-(i - 1)), t, i) * prod)
    if kind == "asc_suffix" and _is_token(sp.x, "a"):
        free = [cnum(v) for v in sp.free]
        if j < i:
            return cnum(0)
        if i == j and k == 0:
            prod = cnum(1)
            for zl in free[:i]:
                prod *= 1 - zl / (a * t ** (n - i))
            return qpoch(ti, ti, i) * qpoch(ti, ti, n - i) / (1 - ti) ** n * qpoch(a * b, t, n - i) * prod
    raise Unsupported(f"no closed form for E~_({k},{i}) at {sp.kind} (x={sp.x}, y={sp.y})")


def _closed_form_lagrange(i, j, x1, x2, t, n, kind, sp, p, spec, form):
    if kind == "xi" and sp.base == "t" and _is_token(sp.y, "x2"):
        if _is_token(sp.x, "x1"):
            return cnum(1) if i == j else cnum(0)
        x = _resolve_point_value(sp.x, p, spec)
        ti = 1 / t
        return (qbinom(j, i, ti) * qpoch(x / x1, t, j - i) * qpoch(x / x2 * t ** (-(n - j)), t, i)
                / (qpoch(x2 / x1 * t ** (n - j - i), t, j - i) * qpoch(x1 / x2 * t ** (-(n - i)), t, i))
                if i <= j else cnum(0))
    if kind == "asc_prefix" and _is_token(sp.x, "x1"):
        free = [cnum(v) for v in sp.free]
        if i < j:
            return cnum(0)
        if i == j:
            if form == 0:
                val = cnum(1)
                for l, zl in enumerate(free[: n - i], start=1):
                    val *= (zl - x1 * t ** i) / (x2 * t ** (l - 1) - x1 * t ** i)
                return val
            val = cnum(1)
            for zl in free[: n - i]:
                val *= 1 - zl / x1 * t ** (-i)
            return val / qpoch(x2 / x1 * t ** (-i), t, n - i)
    if kind == "asc_suffix" and _is_token(sp.x, "x2"):
        free = [cnum(v) for v in sp.free]
        if i > j:
            return cnum(0)
        if i == j:
            if form == 0:
                val = cnum(1)
                for l, zl in enumerate(free[:i], start=1):
                    val *= (zl - x2 * t ** (n - i)) / (x1 * t ** (l - 1) - x2 * t ** (n - i))
                return val
            val = cnum(1)
            for zl in free[:i]:
                val *= 1 - zl / x2 * t ** (-(n - i))
            return val / qpoch(x1 / x2 * t ** (-(n - i)), t, i)
    raise Unsupported(f"no closed form for f_{i} at {sp.kind}")
