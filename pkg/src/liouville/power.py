"""Powers of Liouville numbers: a continued fraction with prime convergent
denominators, witness lifting to integer powers, the exponent-equation scan,
a uniqueness check for good approximations and a best-exponent scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import gcd, mpq, mpz

from .contfrac import CFExpansion, legendre_locate
from .errors import BudgetExceeded, DomainError, PrecisionExhausted
from .exact import (
    RationalInterval,
    int_to_str,
    log_ratio_enclosure,
    nearest_integer,
    rat_from_json,
    rat_to_json,
    str_to_int,
)
from .reals import MAX_PRECISION, ComputableReal, as_real, convergents_until, power_real

DETERMINISTIC_LIMIT = mpz(1) << 64
MR_ROUNDS = 64
GROWTH_LABELS = ("standard", "override")
SIEVE_PRIMES_UP_TO = 1 << 18
SIEVE_WINDOW = 1 << 14


# ---------------------------------------------------------------------------
# primality

def primality_attestation(n, rounds=MR_ROUNDS) -> dict | None:
    """Attestation dict for a prime n, or None when n is composite.

    Below 2^64 the BPSW test is exact. Above it, BPSW is followed by extra
    Miller-Rabin rounds with random bases; the attestation states the count.
    """
    n = mpz(n)
    if n < 2:
        return None
    if n < DETERMINISTIC_LIMIT:
        return {"method": "bpsw-deterministic-below-2^64", "rounds": 0} if gmpy2.is_prime(n, 1) else None
    if not gmpy2.is_prime(n, 25 + rounds):
        return None
    return {"method": "bpsw+miller-rabin", "rounds": int(rounds)}


def check_attestation(n, attestation) -> bool:
    method = attestation.get("method")
    rounds = attestation.get("rounds")
    if method == "bpsw-deterministic-below-2^64":
        return rounds == 0 and mpz(n) < DETERMINISTIC_LIMIT and bool(gmpy2.is_prime(mpz(n), 1))
    if method == "bpsw+miller-rabin":
        return (isinstance(rounds, int) and rounds >= MR_ROUNDS and mpz(n) >= DETERMINISTIC_LIMIT
                and bool(gmpy2.is_prime(mpz(n), 25 + rounds)))
    return False


def _small_primes(limit):
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, int(limit ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytes(len(range(i * i, limit + 1, i)))
    return [i for i in range(limit + 1) if sieve[i]]


_PRIMES = None


def first_prime_in_progression(a, c, r_min, max_candidates=1 << 24):
    """Least ``r >= r_min`` with ``a r + c`` prime, scanning r upward.

    Small-prime sieving over windows of r only skips composites; the scan is
    still linear in r. Returns ``(r, attestation, candidates_scanned)``.
    """
    global _PRIMES
    if _PRIMES is None:
        _PRIMES = _small_primes(SIEVE_PRIMES_UP_TO)
    a, c, r = mpz(a), mpz(c), mpz(r_min)
    if gcd(a, c) != 1:
        raise DomainError("a and c must be coprime")
    scanned = 0
    while scanned < max_candidates:
        W = SIEVE_WINDOW
        alive = bytearray([1]) * W
        for p in _PRIMES:
            ap = int(a % p)
            if ap == 0:
                continue
            bad = (-int(c % p) * pow(ap, -1, p)) % p
            start = (bad - int(r % p)) % p
            if a * (r + start) + c == p:  # p itself is prime, not excluded
                start += p
            if start < W:
                alive[start::p] = bytes(len(range(start, W, p)))
        for i in range(W):
            if alive[i] and gmpy2.is_strong_prp(a * (r + i) + c, 2):
                att = primality_attestation(a * (r + i) + c)
                if att is not None:
                    return r + i, att, scanned + i + 1
        r += W
        scanned += W
    raise BudgetExceeded(f"no prime among {max_candidates} candidates", bits=None, budget=max_candidates)


# ---------------------------------------------------------------------------
# continued fraction with prime convergent denominators

def nu_enclosure(t_n, t_next, precision=64) -> RationalInterval:
    """Enclosure of nu_n, where ``|zeta t_n - s_n| = t_n^(-nu_n)``.

    Uses ``1/(t_{n+1} + t_n) < |zeta t_n - s_n| < 1/t_{n+1}``, so only
    ``t_{n+1}`` is needed, not the rest of the expansion.
    """
    lo = log_ratio_enclosure(t_next, t_n, precision).lo
    hi = log_ratio_enclosure(t_next + t_n, t_n, precision).hi
    return RationalInterval(lo, hi)


@dataclass
class PrimeCFLiouville:
    """Constructed prefix whose convergent denominators ``t_1 .. t_n`` are prime.

    ``attestations[i]`` covers ``t_{i+1}``; ``nu[i]`` encloses ``nu_{i+1}`` for
    every index whose successor denominator is constructed. Beyond the prefix
    the value continues with ``r_{n+1} = t_n^n``.
    """

    cf: CFExpansion
    attestations: list
    nu: list
    seed_length: int
    growth: str = "standard"  # "standard" is r_{g+1} >= t_g^g; "override" marks a custom schedule

    @property
    def conforming(self) -> bool:
        return self.growth == "standard"

    @property
    def denominators(self):
        return self.cf.denominators

    def descriptor(self) -> dict:
        return {"kind": "cf", "quotients": [int_to_str(r) for r in self.cf.partial_quotients],
                "tail": "t_n^n"}

    def real(self) -> ComputableReal:
        from .haupt import zeta_from_descriptor

        return zeta_from_descriptor(self.descriptor())

    def to_json(self) -> dict:
        t = self.cf.denominators
        stages = []
        for i, att in enumerate(self.attestations):
            n = i + 1
            entry = {"n": n, "r": int_to_str(self.cf[n]), "t": int_to_str(t[n]), "primality": att}
            if i < len(self.nu):
                entry["nu_lo"] = rat_to_json(self.nu[i].lo)
                entry["nu_hi"] = rat_to_json(self.nu[i].hi)
            stages.append(entry)
        return {"kind": "rati-stage", "zeta": self.descriptor(), "seed_length": self.seed_length,
                "growth": self.growth, "stages": stages}

    @classmethod
    def from_json(cls, d) -> "PrimeCFLiouville":
        cf = CFExpansion([str_to_int(r) for r in d["zeta"]["quotients"]])
        atts, nus = [], []
        for entry in d["stages"]:
            n = int(entry["n"])
            if not 1 <= n < len(cf) or str_to_int(entry["r"]) != cf[n] or str_to_int(entry["t"]) != cf.denominators[n]:
                raise ValueError(f"stage entry {n} disagrees with the expansion")
            atts.append(entry["primality"])
            if "nu_lo" in entry:
                nus.append(RationalInterval(rat_from_json(entry["nu_lo"]), rat_from_json(entry["nu_hi"])))
        growth = d.get("growth", "standard")
        if growth not in GROWTH_LABELS:
            raise ValueError(f"unknown growth label {growth!r}")
        return cls(cf, atts, nus, int(d["seed_length"]), growth)

    def validate(self, precision=64):
        """Re-check primality, the growth rule and strict growth of nu; ``(ok, reason)``."""
        t, r = self.cf.denominators, self.cf.partial_quotients
        if len(self.attestations) != len(self.cf) - 1:
            return False, "one attestation per denominator t_1.. is required"
        for i, att in enumerate(self.attestations):
            n = i + 1
            if not check_attestation(t[n], att):
                return False, f"t_{n} = {t[n]} fails its primality attestation"
        if self.conforming:
            for g in range(self.seed_length - 1, len(self.cf) - 1):
                if g >= 1 and r[g + 1] < t[g] ** g:
                    return False, f"r_{g + 1} < t_{g}^{g}"
        if len(self.nu) != len(self.cf) - 2:
            return False, "nu must cover t_1 .. t_{n-1}"
        for i, iv in enumerate(self.nu):
            n = i + 1
            if iv != nu_enclosure(t[n], t[n + 1], precision):
                return False, f"nu_{n} enclosure differs on recomputation"
            if i and not self.nu[i - 1].hi < iv.lo:
                return False, f"nu_{n} does not exceed nu_{n - 1}"
        return True, "ok"


def build_rati_zeta(stages=6, seed=(0, 2), growth=None, max_candidates=1 << 24,
                    precision=64) -> PrimeCFLiouville:
    """Extend ``seed`` by ``stages`` quotients, each giving a prime denominator.

    ``r_{g+1}`` is the least ``r >= t_g^g`` (or ``t_g^growth(g)``) with
    ``r t_g + t_{g-1}`` prime; a candidate that would break strict growth of
    nu is skipped in favour of the next prime.
    """
    cf = CFExpansion(seed)
    if len(cf) < 2:
        raise DomainError("seed needs r_0 and r_1")
    t = cf.denominators
    atts = []
    for n in range(1, len(cf)):
        att = primality_attestation(t[n])
        if att is None:
            raise DomainError(f"seed denominator t_{n} = {t[n]} is not prime")
        atts.append(att)
    nus = [nu_enclosure(t[n], t[n + 1], precision) for n in range(1, len(cf) - 1)]
    seed_length = len(cf)
    for _ in range(stages):
        g = len(cf) - 1
        t = cf.denominators
        e = g if growth is None else int(growth(g))
        r = t[g] ** e
        while True:
            r, att, _ = first_prime_in_progression(t[g], t[g - 1] if g else 1, r, max_candidates)
            t_new = r * t[g] + (t[g - 1] if g else 1)
            nu_g = nu_enclosure(t[g], t_new, precision)
            if not nus or nus[-1].hi < nu_g.lo:
                break
            r += 1
        cf.append(r)
        atts.append(att)
        nus.append(nu_g)
    return PrimeCFLiouville(cf.snapshot(), atts, nus, seed_length,
                            "standard" if growth is None else "override")


# ---------------------------------------------------------------------------
# integer powers and witness lifting

def bth_power_generator(zeta_root, b, max_precision=MAX_PRECISION) -> ComputableReal:
    """``zeta_root^b`` for a certifiably positive ``zeta_root``."""
    x = as_real(zeta_root)
    b = int(b)
    if b < 1:
        raise DomainError("b must be at least 1")
    k = 16
    while True:
        iv = x.enclosure(k)
        if iv.lo > 0:
            break
        if iv.hi <= 0:
            raise DomainError("zeta' is not positive")
        if k > max_precision:
            raise DomainError("positivity of zeta' could not be certified")
        k *= 2
    if b == 1:
        return x
    return power_real(x, b, 1)


def lift_bound(k, alpha_abs, q, nu) -> mpq:
    """``k (1 + |alpha|)^(k-1) q^(k-1-nu)`` for integer nu."""
    return mpq(k) * (1 + mpq(alpha_abs)) ** (k - 1) * mpq(q) ** (k - 1 - int(nu))


@dataclass(frozen=True)
class LiftCertificate:
    """``|q^k alpha^k - p^k|`` enclosed in ``left`` and bounded by ``bound``."""

    p: mpz
    q: mpz
    nu: int
    k: int
    alpha_abs: mpz  # integer bound on |alpha| used in the constant
    left: RationalInterval
    bound: mpq

    @property
    def holds(self) -> bool:
        return self.left.hi <= self.bound


def lift_witness_power(p, q, nu, alpha, k, precision=None, max_precision=MAX_PRECISION):
    """Lift ``|q alpha - p| <= q^-nu`` to ``|q^k alpha^k - p^k| <= k(1+|alpha|)^(k-1) q^(k-1-nu)``.

    ``|alpha|`` in the constant is replaced by the least integer bounding it.
    """
    alpha = as_real(alpha)
    p, q, nu, k = mpz(p), mpz(q), int(nu), int(k)
    if q < 1 or k < 1:
        raise DomainError("q and k must be positive")
    bound_in = mpq(1, q ** nu) if nu >= 0 else mpq(q ** -nu)
    prec = precision or int(q.bit_length()) * (nu + k + 1) + 64
    while True:
        iv = alpha.enclosure(prec)
        d = abs(iv * q - p)
        if d.hi <= bound_in:
            break
        if d.lo > bound_in:
            raise DomainError(f"precondition fails: |q alpha - p| > q^-{nu}")
        if prec > max_precision:
            raise PrecisionExhausted("precondition undecided", needed=f"> {max_precision} bits")
        prec *= 2
    alpha_abs = gmpy2.c_div(max(abs(iv.lo), abs(iv.hi)).numerator, max(abs(iv.lo), abs(iv.hi)).denominator)
    left = abs((iv * q) ** k - RationalInterval.point(mpq(p) ** k))
    return LiftCertificate(p, q, nu, k, mpz(alpha_abs), left, lift_bound(k, alpha_abs, q, nu))


# ---------------------------------------------------------------------------
# the exponent equation |q^b zeta^a - p^b| <= q^-eta

@dataclass(frozen=True)
class ExponentHit:
    p: mpz
    q: mpz
    left: RationalInterval  # |q^b zeta^a - p^b|
    margin_lo: mpq  # lower bound on q^-eta - left, as (q^-eta)^den comparison slack


@dataclass(frozen=True)
class LemmaInfReport:
    a: int
    b: int
    eta: mpq
    H: mpz
    direct_cutoff: int
    hits: tuple
    convergents_scanned: int


def _pow_real(zeta, a):
    return zeta if a == 1 else power_real(zeta, a, 1)


def _decide_exponent(zeta_a, p, q, b, eta, max_precision):
    """True/False for ``|q^b zeta^a - p^b| <= q^-eta``, with the final enclosure."""
    n, d = eta.numerator, eta.denominator
    target = mpq(1, q ** n)  # compare left^d against q^-n
    prec = int(q.bit_length()) * (b + int(eta) + 2) + 64
    while True:
        iv = zeta_a.enclosure(prec)
        left = abs(iv * q ** b - RationalInterval.point(mpq(p) ** b))
        if left.hi ** d <= target:
            return True, left
        if left.lo ** d > target:
            return False, left
        if zeta_a.exact_value is not None or prec > max_precision:
            raise PrecisionExhausted(f"exponent equation undecided at q = {q}",
                                     needed=f"> {max_precision} bits")
        prec *= 2


def lemma_inf_scan(zeta, a, b, eta, H, direct_cutoff=None, max_precision=MAX_PRECISION):
    """Every coprime ``(p, q)``, ``2 <= q <= H``, with ``|q^b zeta^a - p^b| <= q^-eta``.

    Above a cutoff where ``q^(b-eta) < 1/2``, a solution makes ``p^b/q^b`` a
    convergent of ``zeta^a`` (Legendre), so only convergents whose numerator
    and denominator are perfect b-th powers are tested; below it every q is
    tried directly.
    """
    a, b, H = int(a), int(b), mpz(H)
    eta = mpq(eta)
    if b < 1 or a < 1:
        raise DomainError("a and b must be positive")
    if gcd(a, b) != 1:
        raise DomainError("a and b must be coprime")
    if eta <= 0:
        raise DomainError("eta must be positive")
    zeta = as_real(zeta)
    zeta_a = _pow_real(zeta, a)
    if direct_cutoff is None:
        if eta <= b:
            direct_cutoff = int(H)
        else:
            # q^(eta-b) > 2 for q > 2^(1/(eta-b))
            direct_cutoff = int(math.floor(2 ** (1 / float(eta - b)))) + 2
    if direct_cutoff > 1 << 20:
        raise BudgetExceeded(f"direct scan up to {direct_cutoff} is too long", budget=1 << 20)
    hits = {}
    for q in range(2, min(direct_cutoff, int(H)) + 1):
        q = mpz(q)
        iv = zeta_a.enclosure(int(q.bit_length()) * b + 64)
        y = iv * q ** b
        base = gmpy2.iroot(max(gmpy2.f_div(y.lo.numerator, y.lo.denominator), mpz(0)), b)[0]
        for p in (base - 1, base, base + 1, base + 2):
            if p < 0 or gcd(p, q) != 1:
                continue
            ok, left = _decide_exponent(zeta_a, p, q, b, eta, max_precision)
            if ok:
                hits[(p, q)] = ExponentHit(p, q, left, mpq(1, q ** eta.numerator) - left.hi ** eta.denominator)
    scanned = 0
    for _, s, t in convergents_until(zeta_a, H ** b, max_precision):
        if t > H ** b:
            break
        scanned += 1
        qb, exact_q = gmpy2.iroot(t, b)
        if not exact_q or qb < 2 or qb <= direct_cutoff:
            continue
        if s < 0:
            continue
        pb, exact_p = gmpy2.iroot(s, b)
        if not exact_p:
            continue
        ok, left = _decide_exponent(zeta_a, pb, qb, b, eta, max_precision)
        if ok:
            hits[(pb, qb)] = ExponentHit(pb, qb, left,
                                         mpq(1, qb ** eta.numerator) - left.hi ** eta.denominator)
    ordered = tuple(hits[k] for k in sorted(hits, key=lambda pq: (pq[1], pq[0])))
    return LemmaInfReport(a, b, eta, H, direct_cutoff, ordered, scanned)


# ---------------------------------------------------------------------------
# uniqueness of very good approximations

@dataclass(frozen=True)
class MinkkoroReport:
    Q: mpz
    searched_up_to: mpz
    solutions: tuple  # all (x, y) with 1 <= x <= searched_up_to and |alpha x - y| < 1/(2Q)
    primitive: tuple  # those with gcd(x, y) = 1
    convergent_index: int | None  # index of y/x among the convergents, for the primitive one

    @property
    def unique(self) -> bool:
        return len(self.primitive) <= 1


def minkkoro_check(alpha, Q, H=None, max_precision=MAX_PRECISION) -> MinkkoroReport:
    """All ``x <= min(Q, H)`` with ``|alpha x - y| < 1/(2Q)``; at most one primitive pair may occur."""
    alpha = as_real(alpha)
    Q = mpz(Q)
    if Q <= 1:
        raise DomainError("Q must exceed 1")
    top = Q if H is None else min(Q, mpz(H))
    bound = mpq(1, 2 * Q)
    sols = []
    for x in range(1, int(top) + 1):
        prec = int(Q.bit_length()) * 2 + 64
        while True:
            iv = alpha.enclosure(prec) * x
            y, _ = nearest_integer(iv.mid)
            d = abs(iv - y)
            if d.hi < bound:
                sols.append((mpz(x), y))
                break
            if d.lo >= bound:
                break
            if prec > max_precision:
                raise PrecisionExhausted(f"undecided at x = {x}", needed=f"> {max_precision} bits")
            prec *= 2
    prim = tuple((x, y) for x, y in sols if gcd(x, y) == 1)
    idx = None
    if len(prim) == 1:
        x, y = prim[0]
        idx = legendre_locate(alpha, y, x, max_precision)
    return MinkkoroReport(Q, top, tuple(sols), prim, idx)


# ---------------------------------------------------------------------------
# best approximation exponents along convergents

@dataclass(frozen=True)
class ExponentScan:
    H: mpz
    entries: tuple  # (n, s, t, enclosure of -log|x - s/t| / log t)
    max_lo: mpq
    max_hi: mpq
    depth: int  # number of convergents examined


def exponent_scan(x, H, precision=64, max_precision=MAX_PRECISION) -> ExponentScan:
    """Enclosures of ``-log|x - s/t| / log t`` over convergents with ``2 <= t <= H``.

    The reported maximum is certified: ``max_lo`` is attained by some
    convergent and no scanned convergent exceeds ``max_hi``.
    """
    x = as_real(x)
    H = mpz(H)
    if H < 2:
        raise DomainError("H must be at least 2")
    entries = []
    depth = 0
    try:
        for n, s, t in convergents_until(x, H, max_precision):
            if t > H:
                break
            depth += 1
            if t < 2:
                continue
            target = mpq(s, t)
            k = 2 * int(t.bit_length()) + 64
            while True:
                d = abs(x.enclosure(k) - RationalInterval.point(target))
                if d.hi == 0:
                    break  # x = s/t exactly: no finite exponent
                if d.lo > 0 and d.hi <= d.lo * (1 + mpq(1, 1 << 20)):
                    e = RationalInterval(log_ratio_enclosure(1 / d.hi, t, precision).lo,
                                         log_ratio_enclosure(1 / d.lo, t, precision).hi)
                    entries.append((n, s, t, e))
                    break
                if k > max_precision:
                    raise PrecisionExhausted(f"distance to s_{n}/t_{n} undecided", needed=f"> {max_precision} bits")
                k *= 2
    except PrecisionExhausted as exc:
        exc.partial = tuple(entries)
        raise
    if not entries:
        raise DomainError("no convergent with 2 <= t <= H")
    return ExponentScan(H, tuple(entries), max(e.lo for *_, e in entries),
                        max(e.hi for *_, e in entries), depth)
