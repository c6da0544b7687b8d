"""Computable reals: oracles returning rational approximations with certified error."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from itertools import count

import gmpy2
from gmpy2 import mpq, mpz

from .contfrac import CFExpansion, cf_of_rational
from .errors import DomainError, PoleError, PrecisionExhausted
from .exact import (
    ONE,
    RationalInterval,
    ZERO,
    int_to_str,
    rat_from_json,
    rat_to_json,
    str_to_int,
)

MAX_PRECISION = 1 << 24
POLE_DEPTH = 1 << 14


class ComputableReal:
    """A real number given by ``approx(k) -> (r, e)`` with ``|x - r| <= e <= 2^-k``.

    Results are memoised per precision. The cache enforces monotone refinement:
    a finer request never reports a larger error than a coarser one already did.
    """

    def __init__(self, approx_fn, descriptor, exact_value=None):
        self._fn = approx_fn
        self.descriptor = descriptor
        self.exact_value = None if exact_value is None else mpq(exact_value)
        self.series = None  # SeriesData for infinite series Liouville numbers
        self._memo: dict = {}
        self._lock = threading.RLock()

    def approx(self, k: int):
        k = max(int(k), 0)
        if self.exact_value is not None:
            return self.exact_value, ZERO
        with self._lock:
            hit = self._memo.get(k)
            if hit is not None:
                return hit
            r, e = self._fn(k)
            r, e = mpq(r), mpq(e)
            if e > mpq(1, 1 << k):
                raise AssertionError(f"oracle broke its contract at k={k}")
            for k2, (r2, e2) in self._memo.items():
                if k2 < k and e2 < e:
                    r, e = r2, e2
            for k2, (_, e2) in list(self._memo.items()):
                if k2 > k and e2 > e:
                    self._memo[k2] = (r, e)
            self._memo[k] = (r, e)
            return r, e

    def enclosure(self, k: int) -> RationalInterval:
        """``[r - e, r + e]`` rounded outward to the dyadic grid ``2^-(k+2)``."""
        r, e = self.approx(k)
        if e == 0:
            return RationalInterval(r, r)
        w = max(int(k), 0) + 2
        lo, hi = r - e, r + e
        if lo.denominator.bit_length() <= w + 1 and hi.denominator.bit_length() <= w + 1:
            return RationalInterval(lo, hi)
        scale = mpz(1) << w
        return RationalInterval(mpq(gmpy2.f_div(lo.numerator * scale, lo.denominator), scale),
                                mpq(gmpy2.c_div(hi.numerator * scale, hi.denominator), scale))

    def to_json(self):
        return self.descriptor

    def __repr__(self):
        kind = self.descriptor.get("kind", "?") if isinstance(self.descriptor, dict) else "?"
        return f"<ComputableReal {kind} ~{float(self.approx(53)[0]):.17g}>"


def exact_real(x) -> ComputableReal:
    x = mpq(x)
    return ComputableReal(None, {"kind": "rational", "value": rat_to_json(x)}, exact_value=x)


def as_real(x) -> ComputableReal:
    return x if isinstance(x, ComputableReal) else exact_real(x)


# -- series-defined Liouville numbers ---------------------------------------

def _factorial_exponents(j):
    return math.factorial(j)


def _resolve_sequence(seq, name):
    """Normalise a 1-based sequence: returns (getter, length or None)."""
    if callable(seq):
        return seq, None
    items = [mpz(v) for v in seq]
    return (lambda j: items[j - 1]), len(items)


def make_series_liouville(M, exponents="factorial", digits="ones", digit_bound=None):
    """``x = sum_j a_j M^(-e_j)`` with a certified tail bound.

    ``exponents``/``digits`` are 1-based callables or finite sequences; the
    strings ``"factorial"`` and ``"ones"`` select ``e_j = j!`` and ``a_j = 1``.
    The tail after term J is bounded by ``2 * d * M^(-e_{J+1})`` where ``d``
    bounds every later digit (1 for ``"ones"``, otherwise ``M - 1``).
    """
    M = mpz(M)
    if M < 2:
        raise ValueError("base M must be at least 2")
    descriptor = {"kind": "series", "M": int_to_str(M)}
    if exponents == "factorial":
        e_of, n_e = _factorial_exponents, None
        descriptor["exponents"] = "factorial"
    else:
        if isinstance(exponents, str):
            raise ValueError(f"unknown exponent family {exponents!r}")
        e_of, n_e = _resolve_sequence(exponents, "exponents")
        if n_e is None:
            descriptor["exponents"] = getattr(exponents, "descriptor", "callable")
        else:
            descriptor["exponents"] = [int_to_str(e_of(j)) for j in range(1, n_e + 1)]
    if digits == "ones":
        d_of, n_d = (lambda j: mpz(1)), None
        bound = mpz(1)
        descriptor["digits"] = "ones"
    else:
        d_of, n_d = _resolve_sequence(digits, "digits")
        bound = M - 1
        descriptor["digits"] = ([int_to_str(d_of(j)) for j in range(1, n_d + 1)]
                                if n_d is not None else "callable")
    if digit_bound is not None:
        bound = mpz(digit_bound)
    if n_e is not None and n_d is not None and n_e != n_d:
        raise ValueError("finite exponent and digit sequences differ in length")
    n_terms = n_e if n_e is not None else n_d

    state = {"J": 0, "num": mpz(0), "e": 0, "sums": [(0, mpz(0))]}
    lock = threading.Lock()
    log2M = math.log2(int(M)) if M.bit_length() < 1000 else float(M.bit_length())

    def term(j):
        e, a = mpz(e_of(j)), mpz(d_of(j))
        if e < 1:
            raise ValueError(f"exponent e_{j} = {e} must be positive")
        if not 1 <= a < M:
            raise ValueError(f"digit a_{j} = {a} outside [1, M)")
        return e, a

    def extend_to(J):
        with lock:
            while state["J"] < J:
                j = state["J"] + 1
                e, a = term(j)
                if e <= state["e"]:
                    raise ValueError("exponents must be strictly increasing")
                state["num"] = state["num"] * M ** (e - state["e"]) + a
                state["e"] = int(e)
                state["J"] = j
                state["sums"].append((state["e"], state["num"]))
            return state["sums"][J]

    if n_terms is not None:
        prev = 0
        for j in range(1, n_terms + 1):
            e, _ = term(j)
            if e <= prev:
                raise ValueError("exponents must be strictly increasing")
            prev = e
        e_J, num = extend_to(n_terms)
        return ComputableReal(None, descriptor, exact_value=mpq(num, M ** e_J))

    def approx(k):
        for J in count(0):
            e_next = mpz(e_of(J + 1))
            if e_next * log2M < k - 2:
                continue
            # 2 d M^-e_next <= 2^-k  <=>  M^e_next >= d 2^(k+1)
            if M ** e_next >= bound * (mpz(1) << (k + 1)):
                e_J, num = extend_to(J)
                return mpq(num, M ** e_J), mpq(2 * bound, M ** e_next)
        raise AssertionError  # pragma: no cover

    real = ComputableReal(approx, descriptor)
    real.series = SeriesData(M, e_of, d_of, bound)
    return real


@dataclass(frozen=True)
class SeriesData:
    """Structure of ``sum_j a_j M^(-e_j)``: 1-based ``e(j)``, ``a(j)`` and a bound on every digit."""

    M: mpz
    e: object
    a: object
    digit_bound: mpz

    def truncation(self, n, modulus=None):
        """``(p, e_n)`` with ``p / M^e_n`` the sum of the first n terms; p reduced mod ``modulus`` if given."""
        e_n = int(self.e(n))
        p = mpz(0)
        for j in range(1, n + 1):
            shift = e_n - int(self.e(j))
            term = self.a(j) * (pow(self.M, shift, modulus) if modulus else self.M ** shift)
            p = (p + term) % modulus if modulus else p + term
        return p, e_n


def liouville_constant(M=10) -> ComputableReal:
    """``L_M = sum_j M^(-j!)``; ``M = 10`` gives Liouville's constant."""
    return make_series_liouville(M)


# -- continued-fraction reals -------------------------------------------------

class _Exhausted(Exception):
    pass


def cf_real(quotients, descriptor=None) -> ComputableReal:
    """Real number given by its partial quotients.

    ``quotients`` may be a finite list/tuple (the value is then that exact
    rational), a complete ``CFExpansion``, an iterator, or a callable
    ``i -> r_i``. Running out of an iterator or callable means the requested
    precision cannot be certified.
    """
    if isinstance(quotients, CFExpansion) and quotients.complete:
        quotients = list(quotients.partial_quotients)
    if isinstance(quotients, (list, tuple)):
        cf = CFExpansion(quotients, complete=True)
        if descriptor is None:
            descriptor = {"kind": "cf", "quotients": [int_to_str(r) for r in cf.partial_quotients]}
        real = ComputableReal(None, descriptor, exact_value=mpq(cf.numerators[-1], cf.denominators[-1]))
        real.cf = cf
        return real

    if isinstance(quotients, CFExpansion):
        cf = quotients
        source = None
    else:
        cf = CFExpansion()
        source = quotients if callable(quotients) else iter(quotients)
    lock = threading.Lock()

    def pull():
        if source is None:
            raise _Exhausted
        i = len(cf)
        try:
            r = source(i) if callable(source) else next(source)
        except (StopIteration, IndexError):
            raise _Exhausted from None
        cf.append(r)

    def ensure(n):
        with lock:
            while len(cf) < n:
                pull()

    def approx(k):
        target = mpz(1) << k
        n = 0
        while True:
            try:
                ensure(n + 2)
            except _Exhausted:
                raise PrecisionExhausted(
                    f"quotient source ended after {len(cf)} terms", needed=f"{k} bits") from None
            t = cf.denominators
            if t[n] * t[n + 1] >= target:
                return mpq(cf.numerators[n], t[n]), mpq(1, t[n] * t[n + 1])
            n += 1

    if descriptor is None:
        descriptor = {"kind": "cf", "generator": getattr(quotients, "descriptor", "callable")}
    real = ComputableReal(approx, descriptor)
    real.cf = cf
    real.cf_ensure = ensure
    return real


def golden_ratio() -> ComputableReal:
    """``(1 + sqrt 5)/2 = [1; 1, 1, ...]``."""
    return cf_real(lambda i: 1, {"kind": "named", "name": "golden"})


# -- rational maps ------------------------------------------------------------

def _horner(coeffs, x):
    acc = None
    for c in reversed(coeffs):
        acc = c if acc is None else acc * x + c
    return acc


def _poly_coeffs(f):
    return [mpq(c) for c in f]


def rational_map(x, P, Q=(1,), max_precision=MAX_PRECISION, pole_depth=POLE_DEPTH) -> ComputableReal:
    """``P(x)/Q(x)`` for coefficient lists ``P``, ``Q`` (constant term first)."""
    x = as_real(x)
    P, Q = _poly_coeffs(P), _poly_coeffs(Q)
    if not any(Q):
        raise ValueError("denominator polynomial is zero")
    descriptor = {"kind": "map", "x": x.descriptor,
                  "P": [rat_to_json(c) for c in P], "Q": [rat_to_json(c) for c in Q]}
    if x.exact_value is not None:
        qv = _horner(Q, x.exact_value)
        if qv == 0:
            raise PoleError("denominator vanishes at the point")
        return ComputableReal(None, descriptor, exact_value=_horner(P, x.exact_value) / qv)

    def approx(k):
        p = k + 8
        while True:
            iv = x.enclosure(p)
            qv = _horner(Q, iv)
            qv = qv if isinstance(qv, RationalInterval) else RationalInterval.point(qv)
            if qv.lo <= 0 <= qv.hi:
                if p > pole_depth:
                    raise PoleError(f"denominator enclosure still contains 0 at {p} bits")
            else:
                val = _horner(P, iv)
                val = val if isinstance(val, RationalInterval) else RationalInterval.point(val)
                val = val / qv
                if val.width <= mpq(2, 1 << k):
                    return val.mid, val.width / 2
            if p > max_precision:
                raise PrecisionExhausted("rational map did not converge", needed=f"{p} bits")
            p *= 2

    return ComputableReal(approx, descriptor)


# -- rational powers ----------------------------------------------------------

def _root_lower(x, b, w):
    """Largest ``y = m/2^w`` with ``y^b <= x`` (x >= 0)."""
    m, _ = gmpy2.iroot(gmpy2.f_div(x.numerator << (w * b), x.denominator), b)
    return mpq(m, mpz(1) << w)


def _root_upper(x, b, w):
    """A ``y = m/2^w`` with ``y^b >= x`` (x >= 0), at most one grid step above the root."""
    m, exact = gmpy2.iroot(gmpy2.c_div(x.numerator << (w * b), x.denominator), b)
    if not exact:
        m += 1
    return mpq(m, mpz(1) << w)


def _exact_root(x, b):
    n, ok1 = gmpy2.iroot(abs(x.numerator), b)
    d, ok2 = gmpy2.iroot(x.denominator, b)
    if ok1 and ok2:
        return mpq(n, d)
    return None


def power_real(x, a: int, b: int = 1, max_precision=MAX_PRECISION) -> ComputableReal:
    """``x^(a/b)`` for certified-positive ``x`` (b-th root by exact integer roots)."""
    x = as_real(x)
    a, b = int(a), int(b)
    if b < 1:
        raise ValueError("b must be positive")
    descriptor = {"kind": "power", "x": x.descriptor, "a": str(a), "b": str(b)}
    if x.exact_value is not None:
        v = x.exact_value
        if v <= 0:
            raise DomainError("power_real needs x > 0")
        root = _exact_root(v, b)
        if root is not None:
            return ComputableReal(None, descriptor, exact_value=root ** a)

    def positive_enclosure(p):
        iv = x.enclosure(p)
        q = p
        while iv.lo <= 0:
            if iv.hi <= 0 or q > POLE_DEPTH:
                raise DomainError("cannot certify x > 0")
            q *= 2
            iv = x.enclosure(q)
        return iv

    def approx(k):
        p = k + 8 + 4 * abs(a)
        while True:
            iv = positive_enclosure(p)
            if a < 0:
                iv = iv.reciprocal()
            w = p + 8
            lo, hi = _root_lower(iv.lo, b, w), _root_upper(iv.hi, b, w)
            if lo <= 0:
                lo = mpq(0)
            out = RationalInterval(lo, hi) ** abs(a)
            if out.width <= mpq(2, 1 << k):
                return out.mid, out.width / 2
            if p > max_precision:
                raise PrecisionExhausted("power did not converge", needed=f"{p} bits")
            p *= 2

    return ComputableReal(approx, descriptor)


# -- trusted continued-fraction prefixes -------------------------------------

def _agreeing_quotients(lo, hi, limit):
    """Quotients shared by every number in ``[lo, hi]`` (one safety term dropped).

    Euclid runs on both endpoints in step and stops at the first disagreement.
    A quotient that ends either expansion is never accepted: a rational endpoint
    may sit exactly on the boundary of a cylinder set.
    """
    a, b = lo.numerator, lo.denominator
    c, d = hi.numerator, hi.denominator
    out = []
    while len(out) <= limit:
        q1, r1 = gmpy2.f_divmod(a, b)
        q2, r2 = gmpy2.f_divmod(c, d)
        if q1 != q2 or r1 == 0 or r2 == 0:
            break
        out.append(q1)
        a, b, c, d = b, r1, d, r2
    return out[:-1]


def cf_prefix(x, n_terms: int, max_precision=MAX_PRECISION) -> CFExpansion:
    """The first ``n_terms`` partial quotients of ``x``, each one certified.

    Exact rationals return their full canonical expansion when it is no longer
    than ``n_terms``. Certified quotients are cached on the real, so repeated
    calls only pay for new terms. On failure ``PrecisionExhausted.partial``
    holds the certified prefix.
    """
    x = as_real(x)
    if x.exact_value is not None:
        full = cf_of_rational(x.exact_value)
        if len(full) <= n_terms:
            return full
        return full.prefix(n_terms)
    cf = getattr(x, "cf", None)
    if cf is not None:
        try:
            x.cf_ensure(n_terms)
        except _Exhausted:
            pass
        if len(cf) >= n_terms:
            return cf.prefix(n_terms)
    with x._lock:
        trusted = getattr(x, "_trusted", None)
        if trusted is None:
            trusted = x._trusted = CFExpansion()
            x._trusted_k = 64
        k = x._trusted_k
        while len(trusted) < n_terms:
            if k > max_precision:
                raise PrecisionExhausted(
                    f"only {len(trusted)} of {n_terms} partial quotients certified",
                    needed=f"> {max_precision} bits", partial=trusted.snapshot())
            iv = x.enclosure(k)
            agreed = _agreeing_quotients(iv.lo, iv.hi, n_terms)
            if len(agreed) > len(trusted):
                if tuple(agreed[: len(trusted)]) != trusted.partial_quotients:
                    raise AssertionError("oracle enclosures are inconsistent")
                for r in agreed[len(trusted):]:
                    trusted.append(r)
            if len(trusted) < n_terms:
                k *= 2
        x._trusted_k = k
        return trusted.prefix(n_terms)


def convergents_until(x, q, max_precision=MAX_PRECISION):
    """Yield certified ``(n, s_n, t_n)`` of x until a denominator exceeds q."""
    x = as_real(x)
    n_terms = 4
    n = 0
    while True:
        cf = cf_prefix(x, n_terms, max_precision=max_precision)
        while n < len(cf):
            s, t = cf.numerators[n], cf.denominators[n]
            yield n, s, t
            if t > q:
                return
            n += 1
        if cf.complete and n >= len(cf):
            return
        t = cf.denominators
        # one term at a time once quotients explode, since the next term may be huge
        near = t[-1] ** 2 >= q
        fast = len(t) > 1 and t[-1].bit_length() > 2 * t[-2].bit_length() + 8
        n_terms = n_terms + 1 if near or fast else 2 * n_terms


# -- descriptors ----------------------------------------------------------------

def real_from_descriptor(d) -> ComputableReal:
    """Rebuild a real from its JSON descriptor (all integers as decimal strings)."""
    kind = d.get("kind")
    if kind == "rational":
        return exact_real(rat_from_json(d["value"]))
    if kind == "named":
        return named_real(d["name"])
    if kind == "series":
        exps = d.get("exponents", "factorial")
        if isinstance(exps, list):
            exps = [str_to_int(e) for e in exps]
        elif exps != "factorial":
            raise ValueError(f"unsupported exponent family {exps!r}")
        digits = d.get("digits", "ones")
        if isinstance(digits, list):
            digits = [str_to_int(v) for v in digits]
        elif digits != "ones":
            raise ValueError(f"unsupported digit family {digits!r}")
        return make_series_liouville(str_to_int(d["M"]), exps, digits)
    if kind == "cf":
        if "quotients" in d and "tail" not in d:
            return cf_real([str_to_int(r) for r in d["quotients"]])
        if d.get("tail") == "t_n^n":
            from .haupt import zeta_from_descriptor

            return zeta_from_descriptor(d)
        head = [str_to_int(r) for r in d.get("quotients", [])]
        tail = d.get("tail", "ones")
        if tail != "ones":
            raise ValueError(f"unsupported cf tail {tail!r}")
        return cf_real(lambda i: head[i] if i < len(head) else 1, d)
    if kind == "map":
        return rational_map(real_from_descriptor(d["x"]),
                            [rat_from_json(c) for c in d["P"]],
                            [rat_from_json(c) for c in d.get("Q", [{"num": "1", "den": "1"}])])
    if kind == "power":
        return power_real(real_from_descriptor(d["x"]), int(d["a"]), int(d.get("b", "1")))
    if kind == "haupt":
        from .haupt import zeta_from_descriptor

        return zeta_from_descriptor(d)
    raise ValueError(f"unknown real kind {kind!r}")


NAMED = {
    "L": lambda: make_series_liouville(10),
    "L2": lambda: make_series_liouville(2),
    "L3": lambda: make_series_liouville(3),
    "golden": golden_ratio,
    "sqrt2": lambda: power_real(exact_real(2), 1, 2),
}


def named_real(name: str) -> ComputableReal:
    try:
        real = NAMED[name]()
    except KeyError:
        raise ValueError(f"unknown named real {name!r}; known: {sorted(NAMED)}") from None
    real.descriptor = {"kind": "named", "name": name}
    return real
