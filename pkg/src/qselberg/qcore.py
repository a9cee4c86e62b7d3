"""Scalar q-calculus: shifted factorials, q-binomials, infinite products,
the parameter record and the genericity guard.

Arithmetic is generic over Python ``complex`` (the 53-bit default) and
``mpmath.mpc``.  Raising the working precision above 53 bits switches every
constructor in this package to mpmath; see :func:`working_precision`.
"""

from __future__ import annotations

import cmath
import contextlib
import contextvars
import hashlib
import json
import math
import threading
from dataclasses import dataclass, field, fields, replace

import mpmath
import numpy as np

from .errors import DivisionByZero, NonConvergent

DEFAULT_PRECISION = 53
GENERIC_THRESHOLD = 1e-12

_precision = contextvars.ContextVar("qselberg_precision", default=DEFAULT_PRECISION)
_recorder = contextvars.ContextVar("qselberg_denominator_recorder", default=None)
# mpmath keeps its precision in process-wide state, so raised-precision blocks
# are serialised across threads
_mp_lock = threading.RLock()


# --------------------------------------------------------------------------
# working precision

@contextlib.contextmanager
def working_precision(bits: int):
    """Evaluate everything inside the block with ``bits`` binary digits."""
    bits = int(bits)
    token = _precision.set(bits)
    try:
        if bits > DEFAULT_PRECISION:
            with _mp_lock, mpmath.workprec(bits):
                yield bits
        else:
            yield bits
    finally:
        _precision.reset(token)


def precision() -> int:
    return _precision.get()


def high_precision() -> bool:
    return _precision.get() > DEFAULT_PRECISION


def cnum(x):
    """Coerce ``x`` to the working complex type."""
    if _precision.get() <= DEFAULT_PRECISION:
        if type(x) is complex:
            return x
        if isinstance(x, (list, tuple)):
            return complex(float(x[0]), float(x[1]))
        return complex(x)
    if isinstance(x, mpmath.mpc):
        return x
    if isinstance(x, (list, tuple)):
        return mpmath.mpc(x[0], x[1])
    return mpmath.mpc(x)


def _unit():
    return 1 + 0j if _precision.get() <= DEFAULT_PRECISION else mpmath.mpc(1)


def array_dtype():
    return object if high_precision() else complex


def carray(values):
    """Array of working-precision complex numbers."""
    if high_precision():
        arr = np.empty(np.shape(values), dtype=object)
        flat = np.asarray(values, dtype=object).ravel()
        arr.ravel()[:] = [cnum(v) for v in flat]
        return arr
    return np.asarray(values, dtype=complex)


def czeros(shape):
    if high_precision():
        arr = np.empty(shape, dtype=object)
        arr.fill(mpmath.mpc(0))
        return arr
    return np.zeros(shape, dtype=complex)


def ceye(size):
    out = czeros((size, size))
    for i in range(size):
        out[i, i] = cnum(1)
    return out


def exact_sum(values):
    """Correctly rounded sum of complex values (fsum on each component)."""
    values = list(values)
    if high_precision() or any(isinstance(v, mpmath.mpc) for v in values):
        return mpmath.fsum(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def to_pair(z) -> list:
    """[re, im] as Python floats, the wire format for complex numbers."""
    z = complex(z)
    return [z.real, z.imag]


def from_pair(v):
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


# --------------------------------------------------------------------------
# parameters

_SCALARS = ("q", "t", "qalpha", "a1", "a2", "b1", "b2")


@dataclass(frozen=True)
class Params:
    """Parameter point (q, t=q^tau, q^alpha, a1, a2, b1, b2) and rank n.

    Only q^alpha and t are stored; alpha and tau never appear, so no complex
    power is ever taken.
    """

    q: complex
    t: complex
    qalpha: complex
    a1: complex
    a2: complex
    b1: complex
    b2: complex
    n: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"n must be a non-negative integer, got {self.n!r}")
        for name in ("q", "t", "qalpha", "a1", "a2", "b1", "b2"):
            v = getattr(self, name)
            finite = cmath.isfinite(v) if isinstance(v, (int, float, complex)) else mpmath.isfinite(v)
            if not finite:
                raise ValueError(f"{name} must be finite, got {v!r}")
            if v == 0:
                raise ValueError(f"{name} must be nonzero")
        if not abs(self.q) < 1:
            raise ValueError(f"|q| must be < 1, got {abs(self.q)}")

    def coerced(self) -> "Params":
        """Copy with all scalars converted to the working complex type."""
        if not high_precision() and all(type(getattr(self, f)) is complex for f in _SCALARS):
            return self
        kw = {f.name: cnum(getattr(self, f.name)) for f in fields(self) if f.name != "n"}
        return replace(self, **kw)

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)

    def swapped(self) -> "Params":
        """Interchange (a1, b1) <-> (a2, b2)."""
        return replace(self, a1=self.a2, b1=self.b2, a2=self.a1, b2=self.b1)

    def shift_alpha(self, times: int = 1) -> "Params":
        return replace(self, qalpha=self.qalpha * self.q ** times)

    def shift_ab(self, r: int, times: int = 1) -> "Params":
        """a_r -> q^times a_r and b_r -> q^-times b_r."""
        if r == 1:
            return replace(self, a1=self.a1 * self.q ** times, b1=self.b1 * self.q ** (-times))
        if r == 2:
            return replace(self, a2=self.a2 * self.q ** times, b2=self.b2 * self.q ** (-times))
        raise ValueError(f"pair index must be 1 or 2, got {r}")

    def to_json(self) -> dict:
        out = {f.name: to_pair(getattr(self, f.name)) for f in fields(self) if f.name != "n"}
        out["n"] = int(self.n)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Params":
        data = dict(data)
        if "qalpha" not in data and "alpha" in data:
            data["qalpha"] = complex(data["q"][0] if isinstance(data["q"], list) else data["q"]) ** float(data.pop("alpha"))
        if "t" not in data and "tau" in data:
            data["t"] = complex(data["q"][0] if isinstance(data["q"], list) else data["q"]) ** float(data.pop("tau"))
        kw = {name: from_pair(data[name]) for name in ("q", "t", "qalpha", "a1", "a2", "b1", "b2")}
        return cls(n=int(data.get("n", 1)), **kw)

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def random_params(rng: np.random.Generator, n: int, q_range=(0.05, 0.8),
                  modulus_range=(0.2, 2.0)) -> Params:
    """Draw a generic parameter point.

    Moduli are log-uniform in ``modulus_range`` with uniform phases; q is real.
    """
    lo, hi = np.log(modulus_range[0]), np.log(modulus_range[1])

    def draw():
        r = float(np.exp(rng.uniform(lo, hi)))
        phi = float(rng.uniform(-np.pi, np.pi))
        return complex(r * np.cos(phi), r * np.sin(phi))

    q = float(rng.uniform(*q_range))
    t, qa, a1, a2, b1, b2 = (draw() for _ in range(6))
    return Params(q=q + 0j, t=t, qalpha=qa, a1=a1, a2=a2, b1=b1, b2=b2, n=n)


def sample_generic(rng: np.random.Generator, n: int, max_attempts: int = 100, **kw) -> Params:
    """:func:`random_params`, resampled until :func:`check_generic` passes."""
    for _ in range(max_attempts):
        p = random_params(rng, n, **kw)
        if check_generic(p, n).passed:
            return p
    raise RuntimeError(f"no generic parameter point found in {max_attempts} attempts")


# --------------------------------------------------------------------------
# shifted factorials

def shifted_factorial(x, c, i: int):
    """(x; c)_i for any integer i, with the reciprocal convention for i < 0."""
    i = int(i)
    one = _unit()
    if i >= 0:
        acc = ck = one
        for _ in range(i):
            acc *= 1 - ck * x
            ck *= c
        return acc
    acc = one
    cinv = one / c
    ck = cinv
    for _ in range(-i):
        f = 1 - ck * x
        if f == 0:
            raise DivisionByZero(f"vanishing factor in ({x}; {c})_{i}")
        acc *= f
        ck *= cinv
    return 1 / acc


qpoch = shifted_factorial


def qbinom(i: int, j: int, c):
    """Gaussian binomial [i choose j]_c; zero outside 0 <= j <= i."""
    if j < 0 or j > i:
        return cnum(0)
    j = min(j, i - j)
    num = den = _unit()
    c = c * num
    for k in range(1, j + 1):
        num *= 1 - c ** (i - j + k)
        den *= 1 - c ** k
    if den == 0:
        raise DivisionByZero(f"[{i} choose {j}]_c with c a root of unity")
    return num / den


def infinite_product(x, c, tail_tol: float = 1e-16, return_tail: bool = False, max_terms: int = 100000):
    """(x; c)_inf truncated once |c^M x| < tail_tol.

    With ``return_tail`` the result is ``(value, bound)`` where ``bound`` is an
    upper bound on the relative size of the neglected factors.
    """
    c = cnum(c)
    x = cnum(x)
    if not abs(c) < 1:
        raise NonConvergent(f"(x; c)_inf needs |c| < 1, got |c| = {abs(c)}")
    acc = cnum(1)
    term = x
    m = 0
    while abs(term) >= tail_tol:
        acc *= 1 - term
        term *= c
        m += 1
        if m > max_terms:
            raise NonConvergent("infinite product did not reach tail tolerance")
    if not return_tail:
        return acc
    # log|prod_{i>=M}(1 - c^i x)| <= sum |c^i x| / (1 - |c^i x|)
    s = float(abs(term))
    bound = s / ((1 - float(abs(c))) * max(1e-300, 1 - s))
    return acc, math.expm1(bound)


# --------------------------------------------------------------------------
# genericity bookkeeping

@dataclass
class GenericityVerdict:
    passed: bool = True
    min_abs: float = math.inf
    offending: str | None = None
    failures: list = field(default_factory=list)
    checked: int = 0

    def record(self, label: str, value, scale: float, threshold: float, factor=None):
        self.checked += 1
        mag = abs(value) / (scale if scale > 1.0 else 1.0)
        if mag < self.min_abs:
            self.min_abs = float(mag)
        if mag < threshold:
            if factor is not None:
                label = f"{label} [factor k={factor}]"
            if self.passed:
                self.offending = label
            self.passed = False
            self.failures.append((label, mag))

    def to_json(self) -> dict:
        return {"passed": self.passed, "min_abs": self.min_abs, "offending": self.offending,
                "failures": [[lab, v] for lab, v in self.failures[:20]], "checked": self.checked}


@contextlib.contextmanager
def recording_denominators(threshold: float = GENERIC_THRESHOLD):
    """Collect every denominator factor evaluated by :func:`qpoch_den`."""
    verdict = GenericityVerdict()
    token = _recorder.set((verdict, threshold))
    try:
        yield verdict
    finally:
        _recorder.reset(token)


def qpoch_den(x, c, i: int, label: str):
    """(x; c)_i destined for a denominator.

    Outside a recording block this is plain :func:`shifted_factorial`, raising
    :class:`DivisionByZero` on an exactly vanishing factor.  Inside, each factor
    is logged with its local scale and zeros are replaced by 1 so the sweep can
    continue.
    """
    rec = _recorder.get()
    if rec is None:
        val = shifted_factorial(x, c, i)
        if val == 0:
            raise DivisionByZero(f"vanishing denominator {label}: ({x}; {c})_{i}")
        return val
    verdict, threshold = rec
    acc = one = _unit()
    if i >= 0:
        ck = one
        for k in range(i):
            f = 1 - ck * x
            verdict.record(label, f, abs(ck * x), threshold, k)
            acc *= f if f != 0 else 1
            ck *= c
        return acc
    cinv = 1 / cnum(c)
    ck = cinv
    for k in range(1, -i + 1):
        f = 1 - ck * x
        verdict.record(label, f, abs(ck * x), threshold, -k)
        acc *= f if f != 0 else 1
        ck *= cinv
    return 1 / acc


def den(value, label: str, scale: float = 1.0):
    """Log a bare scalar denominator (not of shifted-factorial form)."""
    rec = _recorder.get()
    if rec is None:
        if value == 0:
            raise DivisionByZero(f"vanishing denominator {label}")
        return value
    verdict, threshold = rec
    verdict.record(label, value, scale, threshold)
    return value if value != 0 else cnum(1)


def check_generic(p: Params, n: int | None = None) -> GenericityVerdict:
    """Evaluate every denominator factor of the implemented entry formulas.

    The verdict fails, naming the first offending factor, when some factor is
    below ``1e-12`` times its local scale.
    """
    from . import gauss  # local import: gauss depends on this module

    n = p.n if n is None else n
    p = p.with_(n=n)
    with recording_denominators() as verdict:
        gauss.sweep_all_formulas(p)
    return verdict
