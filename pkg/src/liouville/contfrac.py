"""Continued fractions: expansions, convergents and the classical certificate checks."""

from __future__ import annotations

import threading
from dataclasses import dataclass

from gmpy2 import gcd, mpq, mpz

from .errors import DomainError, InvalidDeletion, PrecisionExhausted
from .exact import (
    RationalInterval,
    enclose,
    exact_value,
    floor,
    log_ratio_enclosure,
)

MAX_PRECISION = 1 << 24


class CFExpansion:
    """Partial quotients ``r_0; r_1, r_2, ...`` with convergents kept in step.

    ``complete`` marks an expansion that *is* the number (a finite rational);
    otherwise it is a trusted prefix of some longer, possibly infinite, expansion.
    Growth is append-only and guarded by a lock; ``snapshot()`` hands out an
    immutable copy that can be shared freely.
    """

    def __init__(self, quotients=(), complete=False, _frozen=False):
        self._r: list = []
        self._s: list = []
        self._t: list = []
        self.complete = False
        self._lock = threading.Lock()
        self._frozen = False
        for r in quotients:
            self.append(r)
        if complete:
            self._canonicalize()
            self.complete = True
        self._frozen = _frozen

    # -- growth -----------------------------------------------------------
    def append(self, r):
        if self._frozen:
            raise TypeError("snapshot is immutable")
        r = mpz(r)
        with self._lock:
            if self.complete:
                raise ValueError("cannot extend a complete expansion")
            n = len(self._r)
            if n >= 1 and r < 1:
                raise ValueError(f"partial quotient r_{n} = {r} must be >= 1")
            s2, s1 = (self._s[-2] if n >= 2 else (mpz(0) if n == 1 else mpz(1))), (self._s[-1] if n else mpz(0))
            t2, t1 = (self._t[-2] if n >= 2 else (mpz(1) if n == 1 else mpz(0))), (self._t[-1] if n else mpz(1))
            # seeds: s_{-2}=0, s_{-1}=1, t_{-2}=1, t_{-1}=0
            if n == 0:
                s_new, t_new = r, mpz(1)
            elif n == 1:
                s_new, t_new = r * self._s[0] + 1, r * self._t[0]
            else:
                s_new, t_new = r * s1 + s2, r * t1 + t2
            self._r.append(r)
            self._s.append(s_new)
            self._t.append(t_new)

    def _canonicalize(self):
        if len(self._r) >= 2 and self._r[-1] == 1:
            last = self._r[:-2] + [self._r[-2] + 1]
            self._r, self._s, self._t = [], [], []
            for r in last:
                self.append(r)

    def snapshot(self) -> "CFExpansion":
        with self._lock:
            snap = CFExpansion.__new__(CFExpansion)
            snap._r, snap._s, snap._t = tuple(self._r), tuple(self._s), tuple(self._t)
            snap.complete = self.complete
            snap._lock = threading.Lock()
            snap._frozen = True
            return snap

    def prefix(self, n: int) -> "CFExpansion":
        """Immutable copy of the first n terms (a prefix, even of a complete expansion)."""
        with self._lock:
            if n >= len(self._r) and self.complete:
                return self.snapshot()
            snap = CFExpansion.__new__(CFExpansion)
            snap._r, snap._s, snap._t = tuple(self._r[:n]), tuple(self._s[:n]), tuple(self._t[:n])
            snap.complete = False
            snap._lock = threading.Lock()
            snap._frozen = True
            return snap

    # -- access -----------------------------------------------------------
    @property
    def partial_quotients(self):
        return tuple(self._r)

    @property
    def denominators(self):
        return tuple(self._t)

    @property
    def numerators(self):
        return tuple(self._s)

    def __len__(self):
        return len(self._r)

    def __getitem__(self, i):
        return self._r[i]

    def __eq__(self, other):
        if not isinstance(other, CFExpansion):
            return NotImplemented
        return self.partial_quotients == other.partial_quotients and self.complete == other.complete

    def __repr__(self):
        rs = [str(int(r)) if r.bit_length() < 64 else f"<{r.bit_length()} bits>" for r in self._r]
        head = rs[0] if rs else ""
        tail = ", ".join(rs[1:])
        return f"[{head}; {tail}]" + ("" if self.complete else "...")


def cf_of_rational(x) -> CFExpansion:
    """Canonical finite expansion of a rational by the Euclidean algorithm."""
    x = mpq(x)
    a, b = x.numerator, x.denominator
    rs = []
    while b:
        q, r = divmod(a, b)
        rs.append(q)
        a, b = b, r
    return CFExpansion(rs, complete=True)


def reconstruct_value(cf: CFExpansion):
    """The rational ``[r_0; r_1, ..., r_n]`` given by the whole expansion."""
    if not len(cf):
        raise ValueError("empty expansion")
    return mpq(cf.numerators[-1], cf.denominators[-1])


def convergents(cf: CFExpansion, n: int):
    """The n-th convergent ``(s_n, t_n)``."""
    if not 0 <= n < len(cf):
        raise IndexError(f"convergent index {n} out of range for length {len(cf)}")
    return cf.numerators[n], cf.denominators[n]


def _decide_lt(value_fn, bound, what, max_precision=MAX_PRECISION, start=64):
    """Certify ``value < bound`` (True), ``value >= bound`` (False) by refinement."""
    precision = start
    while precision <= max_precision:
        iv = value_fn(precision)
        if iv.hi < bound:
            return True
        if iv.lo >= bound:
            return False
        if iv.width == 0:
            return iv.hi < bound
        precision *= 2
    raise PrecisionExhausted(f"could not decide {what}", needed=f"> {max_precision} bits")


def legendre_locate(x, p, q, max_precision=MAX_PRECISION):
    """Index n with ``p/q == s_n/t_n`` when ``|xq - p| < 1/(2q)``, else None (no claim)."""
    p, q = mpz(p), mpz(q)
    if q < 1:
        raise ValueError("q must be positive")
    if gcd(p, q) != 1:
        raise ValueError("p and q must be coprime")
    bound = mpq(1, 2 * q)
    hit = _decide_lt(lambda k: abs(enclose(x, k) * q - p), bound,
                     "the Legendre hypothesis", max_precision)
    if not hit:
        return None
    exact = exact_value(x)
    if exact is not None:
        cf = cf_of_rational(exact)
        for n in range(len(cf)):
            if (cf.numerators[n], cf.denominators[n]) == (p, q):
                return n
        raise AssertionError("Legendre's theorem violated")  # pragma: no cover
    from .reals import convergents_until

    for n, s, t in convergents_until(x, q, max_precision=max_precision):
        if t == q and s == p:
            return n
        if t > q:
            break
    raise AssertionError("Legendre's theorem violated")  # pragma: no cover


@dataclass(frozen=True)
class LagrangeCertificate:
    n: int
    s_n: mpz
    t_n: mpz
    distance: RationalInterval  # |alpha t_n - s_n|
    lower: mpq  # r_{n+2}/t_{n+2}
    upper: mpq  # 1/t_{n+1}
    weak_upper: mpq  # 1/(t_n r_{n+1})
    precision_bits: int

    @property
    def holds(self) -> bool:
        return self.lower < self.distance.lo and self.distance.hi < self.upper <= self.weak_upper


def lagrange_check(cf: CFExpansion, value, n: int, max_precision=MAX_PRECISION) -> LagrangeCertificate:
    """Certify ``r_{n+2}/t_{n+2} < |alpha t_n - s_n| < 1/t_{n+1} <= 1/(t_n r_{n+1})``."""
    if not 0 <= n or not n + 2 < len(cf):
        raise IndexError("need n+2 < len(cf)")
    r, s, t = cf.partial_quotients, cf.numerators, cf.denominators
    lower = mpq(r[n + 2], t[n + 2])
    upper = mpq(1, t[n + 1])
    weak = mpq(1, t[n] * r[n + 1])
    precision = 64 + 2 * int(t[n + 2].bit_length())
    while precision <= max_precision:
        d = abs(enclose(value, precision) * t[n] - s[n])
        if lower < d.lo and d.hi < upper:
            return LagrangeCertificate(n, s[n], t[n], d, lower, upper, weak, precision)
        if d.hi <= lower or d.lo >= upper:
            raise DomainError(f"Lagrange chain certifiably fails at n={n}: value inconsistent with cf")
        if d.width == 0:
            raise DomainError(f"Lagrange chain fails at n={n} for an exact value")
        precision *= 2
    raise PrecisionExhausted(f"Lagrange check at n={n} undecided", needed=f"> {max_precision} bits")


def liouville_ratio_profile(cf: CFExpansion, precision: int = 64):
    """Enclosures of ``log t_{n+1} / log t_n`` for n >= 1 (None where t_n = 1)."""
    if len(cf) < 3:
        raise ValueError("need at least three partial quotients")
    t = cf.denominators
    out = []
    for n in range(1, len(cf) - 1):
        if t[n] == 1:
            out.append(None)
        else:
            out.append(log_ratio_enclosure(t[n + 1], t[n], precision))
    return out


def delete_partial_quotients(cf: CFExpansion, T) -> CFExpansion:
    """Drop every r_i with ``i - 1`` in T; r_0 is never touched."""
    T = set(T)
    for j in T:
        if j < 0 or j + 1 >= len(cf):
            raise InvalidDeletion(f"index {j} does not name a deletable partial quotient")
    kept = [r for i, r in enumerate(cf.partial_quotients) if i == 0 or (i - 1) not in T]
    return CFExpansion(kept, complete=cf.complete)


def floor_value(cf: CFExpansion):
    return floor(reconstruct_value(cf))


# -- expansion files: one integer per line, r_0 first, '#' comments ---------

def parse_expansion(text: str, complete: bool = True) -> CFExpansion:
    from .exact import str_to_int

    rs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rs.append(str_to_int(line))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not rs:
        raise ValueError("expansion file has no partial quotients")
    return CFExpansion(rs, complete=complete)


def format_expansion(cf: CFExpansion, comment: str | None = None) -> str:
    from .exact import int_to_str

    lines = [f"# {comment}"] if comment else []
    lines += [int_to_str(r) for r in cf.partial_quotients]
    return "\n".join(lines) + "\n"
