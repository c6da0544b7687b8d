"""Exact integer/rational arithmetic, nearest-integer norms and certified intervals.

Rationals are ``gmpy2.mpq`` values (always reduced, denominator positive) and
integers are ``gmpy2.mpz`` or plain ``int``; the two interoperate freely.
No decision here rests on floating point; floats only seed exact searches.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from gmpy2 import mpq, mpz

from .errors import DomainError, RationalHit

if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)

ZERO = mpq(0)
ONE = mpq(1)
HALF = mpq(1, 2)

DEFAULT_EXPONENT_WIDTH = mpq(1, 2**20)

_INT_RE = re.compile(r"^-?[0-9]+$")


def Q(x, y=None):
    """Coerce to an exact rational; ``Q(p, q)`` builds p/q."""
    if y is None:
        if isinstance(x, str):
            return mpq(x)
        return mpq(x)
    if y == 0:
        raise ZeroDivisionError("rational with zero denominator")
    return mpq(x, y)


def floor(x) -> mpz:
    x = mpq(x)
    return x.numerator // x.denominator


def ceil(x) -> mpz:
    x = mpq(x)
    return -((-x.numerator) // x.denominator)


def int_to_str(n) -> str:
    """Decimal string of an integer of any size (fast for huge operands)."""
    return mpz(n).digits(10)


def str_to_int(s) -> mpz:
    if isinstance(s, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(s, int) or isinstance(s, type(mpz(0))):
        return mpz(s)
    if not isinstance(s, str) or not _INT_RE.match(s):
        raise ValueError(f"not a decimal integer string: {s!r}")
    return mpz(s)


def rat_to_json(x) -> dict:
    x = mpq(x)
    return {"num": int_to_str(x.numerator), "den": int_to_str(x.denominator)}


def rat_from_json(d) -> mpq:
    num = str_to_int(d["num"])
    den = str_to_int(d["den"])
    if den <= 0:
        raise ValueError("denominator must be positive")
    x = mpq(num, den)
    if x.denominator != den:
        raise ValueError("rational is not stored in lowest terms")
    return x


def bits(x) -> int:
    """Size in bits of an integer or of the larger part of a rational."""
    x = mpq(x)
    return max(int(gmpy2.bit_length(x.numerator)), int(gmpy2.bit_length(x.denominator)))


# ---------------------------------------------------------------------------
# nearest integers and norms

def nearest_integer(x):
    """Return ``(n, d)`` with ``d = |x - n| <= 1/2`` minimal; ties go to the smaller n."""
    x = mpq(x)
    n = ceil(x - HALF)
    return n, abs(x - n)


def norm_of_multiple(q, x) -> mpq:
    """Exact value of ``||q x||``."""
    if q < 1:
        raise DomainError("q must be a positive integer")
    return nearest_integer(mpz(q) * mpq(x))[1]


# ---------------------------------------------------------------------------
# intervals

@dataclass(frozen=True)
class RationalInterval:
    """Closed interval ``[lo, hi]`` with exact rational endpoints.

    ``lo_strict``/``hi_strict`` record that the enclosed quantity is known to be
    strictly inside the corresponding endpoint. Arithmetic ignores the flags, so
    derived intervals are plain closed enclosures.
    """

    lo: mpq
    hi: mpq
    lo_strict: bool = False
    hi_strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", mpq(self.lo))
        object.__setattr__(self, "hi", mpq(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x):
        return cls(x, x)

    @classmethod
    def around(cls, centre, radius):
        centre, radius = mpq(centre), mpq(radius)
        return cls(centre - radius, centre + radius)

    @property
    def width(self) -> mpq:
        return self.hi - self.lo

    @property
    def mid(self) -> mpq:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = mpq(x)
        return self.lo <= x <= self.hi

    def __contains__(self, x):
        return self.contains(x)

    def overlaps(self, other) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def certainly_lt(self, x) -> bool:
        """The enclosed value is certainly < x."""
        x = mpq(x)
        return self.hi < x or (self.hi == x and self.hi_strict)

    def certainly_gt(self, x) -> bool:
        x = mpq(x)
        return self.lo > x or (self.lo == x and self.lo_strict)

    def __add__(self, other):
        other = _iv(other)
        return RationalInterval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_iv(other))

    def __rsub__(self, other):
        return _iv(other) - self

    def __mul__(self, other):
        other = _iv(other)
        ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return RationalInterval(min(ps), max(ps))

    __rmul__ = __mul__

    def reciprocal(self):
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        return RationalInterval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        return self * _iv(other).reciprocal()

    def __rtruediv__(self, other):
        return _iv(other) * self.reciprocal()

    def __pow__(self, k: int):
        if k < 0:
            return self.reciprocal() ** (-k)
        if k == 0:
            return RationalInterval(ONE, ONE)
        a, b = self.lo ** k, self.hi ** k
        if k % 2 == 0 and self.lo <= 0 <= self.hi:
            return RationalInterval(ZERO, max(a, b))
        return RationalInterval(min(a, b), max(a, b))

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return RationalInterval(ZERO, max(-self.lo, self.hi))

    def hull(self, other):
        other = _iv(other)
        return RationalInterval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other):
        other = _iv(other)
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("intervals do not overlap")
        return RationalInterval(lo, hi)

    def to_json(self) -> dict:
        return {"lo": rat_to_json(self.lo), "hi": rat_to_json(self.hi)}

    def __repr__(self):
        return f"[{float(self.lo):.6g}, {float(self.hi):.6g}]"


def _iv(x) -> RationalInterval:
    if isinstance(x, RationalInterval):
        return x
    return RationalInterval.point(x)


def norm_enclosure(x: RationalInterval):
    """Enclosure of ``||x||`` for every x in the interval.

    Returns ``(n, RationalInterval)`` where n is the common nearest integer, or
    ``(None, [0, 1/2])`` when the interval straddles a half-integer.
    """
    n_lo, _ = nearest_integer(x.lo)
    n_hi, _ = nearest_integer(x.hi)
    if n_lo != n_hi:
        return None, RationalInterval(ZERO, HALF)
    d_lo, d_hi = x.lo - n_lo, x.hi - n_lo
    if d_lo <= 0 <= d_hi:
        return n_lo, RationalInterval(ZERO, max(-d_lo, d_hi))
    a, b = abs(d_lo), abs(d_hi)
    return n_lo, RationalInterval(min(a, b), max(a, b))


# ---------------------------------------------------------------------------
# certified logarithms (fixed-point, integer only)

def _atanh_fixed(z_num, z_den, w):
    """Integers ``(lo, hi)`` with ``lo <= 2**w * atanh(z_num/z_den) <= hi`` for 0 <= z <= 1/3."""
    if z_num == 0:
        return mpz(0), mpz(0)
    z_num, z_den = mpz(z_num), mpz(z_den)
    num2, den2 = z_num * z_num, z_den * z_den
    t = (z_num << w) // z_den
    s = mpz(0)
    n = 0
    while t:
        s += t // (2 * n + 1)
        t = (t * num2) // den2
        n += 1
    # each truncated term is short by at most n+1 units; the tail past the
    # first vanishing term is at most (n+1)(9/8)/(2n+1) <= 1 unit
    return s, s + 2 * n + 2


@lru_cache(maxsize=64)
def _ln2_fixed(w):
    lo, hi = _atanh_fixed(1, 3, w)
    return 2 * lo, 2 * hi


def log_enclosure(x, precision: int = 64) -> RationalInterval:
    """Certified enclosure of ``ln x`` of width about ``2**-precision`` (times |log2 x|)."""
    x = mpq(x)
    if x <= 0:
        raise DomainError("logarithm of a non-positive number")
    num, den = x.numerator, x.denominator
    e = int(gmpy2.bit_length(num)) - int(gmpy2.bit_length(den))
    # normalise so that 1 <= x / 2**e < 2
    if e >= 0:
        if num < (den << e):
            e -= 1
    else:
        if (num << -e) < den:
            e -= 1
    w = precision + int(gmpy2.bit_length(abs(e) + 1)) + 16
    if e >= 0:
        m = (num << w) // (den << e)
    else:
        m = (num << (w - e)) // den
    one = mpz(1) << w
    lo, hi = _atanh_fixed(m - one, m + one, w)
    ly_lo, ly_hi = 2 * lo, 2 * hi + 2  # +2 covers ln((m+1)/m) <= 2**-w
    l2_lo, l2_hi = _ln2_fixed(w)
    if e >= 0:
        a, b = e * l2_lo + ly_lo, e * l2_hi + ly_hi
    else:
        a, b = e * l2_hi + ly_lo, e * l2_lo + ly_hi
    scale = mpz(1) << w
    return RationalInterval(mpq(a, scale), mpq(b, scale))


def log_ratio_enclosure(num_x, den_x, precision: int = 64) -> RationalInterval:
    """Enclosure of ``ln(num_x) / ln(den_x)`` for positive rationals with den_x != 1."""
    a = log_enclosure(num_x, precision)
    b = log_enclosure(den_x, precision)
    if b.lo <= 0 <= b.hi:
        raise DomainError("logarithm in the denominator is not bounded away from zero")
    return a / b


def approximation_exponent(q, norm, width=DEFAULT_EXPONENT_WIDTH) -> RationalInterval:
    """Certified enclosure of ``-log(norm) / log(q)``.

    The integer part is fixed by exact power bracketing ``q**k <= 1/norm < q**(k+1)``;
    certified logarithms then narrow the enclosure to ``width``. A strict upper
    endpoint is flagged via ``hi_strict``.
    """
    q = mpz(q)
    norm = mpq(norm)
    if q < 2:
        raise DomainError("q must be at least 2")
    if norm == 0:
        raise RationalHit("norm is exactly zero: exponent is +infinity")
    if norm < 0:
        raise DomainError("norm must be positive")
    X = 1 / norm
    k = _bracket(q, X)
    if mpq(q) ** k == X:
        return RationalInterval(k, k)
    lo, hi = mpq(k), mpq(k + 1)
    width = mpq(width)
    precision = 48 + int(gmpy2.bit_length(abs(k) + 1))
    while True:
        r = log_ratio_enclosure(X, q, precision)
        new_lo, new_hi = max(lo, r.lo), min(hi, r.hi)
        if new_hi - new_lo <= width or precision > 1 << 20:
            return RationalInterval(new_lo, new_hi, hi_strict=new_hi == k + 1)
        precision *= 2


def _log2_estimate(x) -> float:
    """Rough float log2 of a positive rational; only used to seed exact searches."""
    x = mpq(x)
    num, den = x.numerator, x.denominator
    sn, sd = max(0, int(gmpy2.bit_length(num)) - 60), max(0, int(gmpy2.bit_length(den)) - 60)
    return math.log2(int(num >> sn)) + sn - math.log2(int(den >> sd)) - sd


def _bracket(q, X):
    """Return k with ``q**k <= X < q**(k+1)``; the float guess is corrected exactly."""
    q = mpz(q)
    X = mpq(X)
    qq = mpq(q)
    k = int(_log2_estimate(X) // _log2_estimate(q))
    p = qq ** k
    while p > X:
        k -= 1
        p /= qq
    nxt = p * qq
    while nxt <= X:
        k += 1
        p = nxt
        nxt = p * qq
    return k


def enclose(x, precision: int) -> RationalInterval:
    """Enclosure of an exact rational or of anything exposing ``enclosure(bits)``."""
    if hasattr(x, "enclosure"):
        return x.enclosure(precision)
    return RationalInterval.point(mpq(x))


def is_exact(x) -> bool:
    return not hasattr(x, "enclosure") or getattr(x, "exact_value", None) is not None


def exact_value(x):
    """The exact rational behind ``x`` if it has one, else None."""
    if not hasattr(x, "enclosure"):
        return mpq(x)
    return getattr(x, "exact_value", None)
