"""Witnesses for ``||q zeta|| <= q^-N``, minimum functions and class probes.

Every verdict here is about a finite range of N or of convergents; nothing is
claimed about the infinite tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from gmpy2 import gcd, mpq, mpz

from .errors import BudgetExceeded, DomainError, PrecisionExhausted, RationalHit
from .exact import (
    RationalInterval,
    int_to_str,
    log_enclosure,
    log_ratio_enclosure,
    nearest_integer,
    rat_to_json,
)
from .reals import ComputableReal, as_real, cf_prefix

MAX_PRECISION = 1 << 25


# ---------------------------------------------------------------------------
# witnesses

@dataclass(frozen=True)
class Witness:
    """``q >= 2`` and ``p`` coprime with ``|q zeta - p| <= norm <= q^-N``."""

    q: mpz
    N: int
    p: mpz
    norm: mpq
    slack: mpq
    precision_bits: int
    holds: bool = field(default=True, init=False)

    def to_json(self, zeta_descriptor) -> dict:
        return {
            "kind": "witness",
            "zeta": zeta_descriptor,
            "q": int_to_str(self.q),
            "N": int(self.N),
            "p": int_to_str(self.p),
            "norm_num": int_to_str(self.norm.numerator),
            "norm_den": int_to_str(self.norm.denominator),
            "slack_num": int_to_str(self.slack.numerator),
            "slack_den": int_to_str(self.slack.denominator),
            "precision_bits": int(self.precision_bits),
        }


@dataclass(frozen=True)
class Refusal:
    """``||q zeta|| > q^-N`` is certified: ``lower`` is a lower bound on the norm."""

    q: mpz
    N: int
    lower: mpq
    reason: str = "norm exceeds bound"
    holds: bool = field(default=False, init=False)


def measure_multiple(zeta, q, precision):
    """At one precision: ``(p, lower, upper)`` bounds on ``|q zeta - p|``, p nearest.

    Returns ``p = None`` when the nearest integer is not yet determined.
    """
    r, e = zeta.approx(precision)
    p, d = nearest_integer(q * r)
    slop = q * e
    if d + slop >= mpq(1, 2):
        return None, None, None
    return p, max(d - slop, mpq(0)), d + slop


def _start_precision(q, N):
    return int(q.bit_length()) * (N + 1) + 64


def verify_witness(zeta, q, N, max_precision=MAX_PRECISION):
    """Decide ``||q zeta|| <= q^-N`` with certified enclosures.

    A nearest integer sharing a factor g with q is reduced to the primitive
    pair ``(p/g, q/g)``, which satisfies the inequality whenever ``(p, q)`` does.
    """
    zeta = as_real(zeta)
    q, N = mpz(q), int(N)
    if q < 2:
        raise DomainError("q must be at least 2")
    if N < 1:
        raise DomainError("N must be at least 1")
    bound = mpq(1, q ** N)
    k = _start_precision(q, N)
    while True:
        p, lower, upper = measure_multiple(zeta, q, k)
        if p is not None:
            if upper == 0:
                raise RationalHit(f"||{q} zeta|| = 0: zeta = {p}/{q} is rational")
            if lower > bound:
                return Refusal(q, N, lower)
            if upper <= bound:
                g = gcd(p, q)
                if g == 1:
                    return Witness(q, N, p, upper, bound - upper, k)
                if q // g < 2:
                    return Refusal(q, N, lower, reason=f"nearest integer {p} is a multiple of q")
                return verify_witness(zeta, q // g, N, max_precision)
            if zeta.exact_value is not None:
                raise AssertionError("exact enclosure cannot straddle")  # pragma: no cover
        if k > max_precision:
            raise PrecisionExhausted(f"||q zeta|| vs q^-{N} undecided for q = {q}",
                                     needed=f"> {max_precision} bits")
        k *= 2


def recheck_witness(zeta, q, N, p, norm, slack, precision_bits):
    """Recompute a stored witness at its own precision; every field must match."""
    zeta = as_real(zeta)
    q, p = mpz(q), mpz(p)
    if q < 2 or N < 1:
        return False, "q >= 2 and N >= 1 required"
    if gcd(p, q) != 1:
        return False, "p and q are not coprime"
    bound = mpq(1, q ** N)
    if slack != bound - norm:
        return False, "slack differs from q^-N - norm"
    if slack < 0:
        return False, "norm exceeds q^-N"
    p2, _, upper = measure_multiple(zeta, q, precision_bits)
    if p2 is None:
        return False, "nearest integer undetermined at the stored precision"
    if p2 != p:
        return False, f"nearest integer is {p2}, not {p}"
    if upper != norm:
        return False, "recomputed norm bound differs"
    return True, "ok"


# ---------------------------------------------------------------------------
# bounds phi(N), possibly far too large to materialise

class Phi:
    """A non-decreasing bound ``phi(N)`` evaluated at integers.

    ``exponent(N)`` (with ``base``) describes ``phi(N) = base^exponent(N)``;
    ``value(N)`` materialises it only when it fits in ``budget_bits``.
    """

    def __init__(self, name, value_fn=None, base=None, exponent_fn=None, budget_bits=1 << 25):
        self.name = name
        self._value = value_fn
        self.base = None if base is None else mpz(base)
        self._exponent = exponent_fn
        self.budget_bits = budget_bits

    def exponent(self, N):
        return mpz(self._exponent(N))

    def log2(self, N) -> float:
        if self._exponent is not None:
            return float(self.exponent(N)) * math.log2(int(self.base))
        return math.log2(int(self.value(N)))

    def value(self, N) -> mpz:
        if self._exponent is None:
            return mpz(self._value(N))
        e = self.exponent(N)
        if e * self.base.bit_length() > self.budget_bits:
            raise BudgetExceeded(f"phi({N}) = {self.base}^{e} exceeds the bit budget",
                                 bits=e * self.base.bit_length(), budget=self.budget_bits)
        return self.base ** e

    def admits(self, q, N) -> bool:
        """``q <= phi(N)`` decided without materialising a huge phi(N)."""
        q = mpz(q)
        if self._exponent is None:
            return q <= self.value(N)
        e = self.exponent(N)
        lo_bits = e * (self.base.bit_length() - 1)
        if q.bit_length() <= lo_bits:
            return True
        if q.bit_length() > e * self.base.bit_length() + 1:
            return False
        return q <= self.base ** e

    def check_valid(self, N):
        if not self.admits(2, N):
            raise DomainError(f"phi({N}) < 2 is not a valid bound")

    def __repr__(self):
        return f"Phi({self.name})"


def ext_factorial(x) -> mpq:
    """``x! = x (x-1) ... (1 + {x})`` for rational ``x >= 0`` (empty product is 1)."""
    x = mpq(x)
    if x < 0:
        raise DomainError("factorial of a negative number")
    out = mpq(1)
    y = x
    while y >= 1:
        out *= y
        y -= 1
    return out


def phi_identity():
    return Phi("x", value_fn=lambda N: N)


def phi_power(base, exponent_fn, name):
    return Phi(name, base=base, exponent_fn=exponent_fn)


PHI_NAMED = {
    "x": phi_identity,
    "10^(x+1)!": lambda: phi_power(10, lambda N: math.factorial(N + 1), "10^(x+1)!"),
    "2^(x!)!": lambda: phi_power(2, lambda N: math.factorial(math.factorial(N)), "2^(x!)!"),
    "2^x": lambda: phi_power(2, lambda N: N, "2^x"),
    "2^(2^x)": lambda: phi_power(2, lambda N: mpz(2) ** N, "2^(2^x)"),
}


def named_phi(name: str) -> Phi:
    try:
        return PHI_NAMED[name]()
    except KeyError:
        raise ValueError(f"unknown phi {name!r}; known: {sorted(PHI_NAMED)}") from None


# ---------------------------------------------------------------------------
# searching for witnesses

def _admits_fn(q_max, N):
    if q_max is None:
        return lambda q: True
    if isinstance(q_max, Phi):
        return lambda q: q_max.admits(q, N)
    if callable(q_max):
        return q_max
    bound = mpz(q_max)
    return lambda q: q <= bound


def iter_convergent_denominators(zeta, max_precision=MAX_PRECISION):
    """Certified ``(n, s_n, t_n, t_{n+1})`` of zeta, as many as the oracle allows.

    ``t_{n+1}`` is None only at the end of a finite expansion.
    """
    n_terms, n = 8, 0
    while True:
        cf = cf_prefix(zeta, n_terms, max_precision=max_precision)
        last = len(cf) if cf.complete else len(cf) - 1
        while n < last:
            t_next = cf.denominators[n + 1] if n + 1 < len(cf) else None
            yield n, cf.numerators[n], cf.denominators[n], t_next
            n += 1
        if cf.complete:
            return
        n_terms *= 2


def _certainly_fails(t, t_next, N):
    """Lagrange: ``||t zeta|| > 1/(t_{n+1} + t_n)``, so ``t^N >= t_{n+1} + t`` rules t out."""
    if t_next is None:
        return False
    if (t.bit_length() - 1) * N > t_next.bit_length() + 1:
        return True
    return t ** N >= t_next + t


@dataclass(frozen=True)
class SearchResult:
    witness: Witness | None
    candidates_checked: int
    exhaustive: bool  # True when every q in [2, q] was tried, not just convergents


def witness_search(zeta, N, q_max=None, q_min=2, max_precision=MAX_PRECISION):
    """Smallest primitive ``q`` with ``||q zeta|| <= q^-N`` and q within ``q_max``.

    For ``N >= 2`` only convergent denominators are candidates, so minimality
    is certified by refusing every smaller convergent denominator. ``N = 1``
    scans every q up to the first convergent denominator above 1, which always
    qualifies. Returns a ``SearchResult``; ``.witness`` is None when nothing in
    range qualifies.
    """
    zeta = as_real(zeta)
    N = int(N)
    if N < 1:
        raise DomainError("N must be at least 1")
    if zeta.exact_value is not None:
        raise RationalHit("input is an exact rational; some ||q zeta|| vanishes")
    admits = _admits_fn(q_max, N)
    checked = 0
    if N == 1:
        first = None
        for _, _, t, _ in iter_convergent_denominators(zeta, max_precision):
            if t >= 2:
                first = t
                break
        q = mpz(max(q_min, 2))
        while q <= first and admits(q):
            checked += 1
            res = verify_witness(zeta, q, 1, max_precision)
            if res.holds and res.q == q:
                return SearchResult(res, checked, True)
            q += 1
        return SearchResult(None, checked, True)
    for _, _, t, t_next in iter_convergent_denominators(zeta, max_precision):
        if t < max(q_min, 2):
            continue
        if not admits(t):
            break
        checked += 1
        if _certainly_fails(t, t_next, N):
            continue
        res = verify_witness(zeta, t, N, max_precision)
        if res.holds:
            return SearchResult(res, checked, False)
    return SearchResult(None, checked, False)


@dataclass(frozen=True)
class MinimumFunction:
    steps: tuple  # ((N, q), ...)
    witnesses: tuple

    def q(self, N):
        for n, q in self.steps:
            if n == N:
                return q
        raise KeyError(N)


def minimum_function(zeta, N_max, q_max=None, max_precision=MAX_PRECISION) -> MinimumFunction:
    """``q(N)`` for ``N = 1..N_max``; later searches start at the previous q."""
    if N_max < 1:
        raise DomainError("N_max must be at least 1")
    steps, wits = [], []
    q_prev = 2
    for N in range(1, N_max + 1):
        try:
            found = witness_search(zeta, N, q_max, q_min=q_prev if N > 2 else 2,
                                   max_precision=max_precision).witness
        except PrecisionExhausted as exc:
            exc.partial = MinimumFunction(tuple(steps), tuple(wits))
            raise
        if found is None:
            break
        steps.append((N, found.q))
        wits.append(found)
        q_prev = found.q
    return MinimumFunction(tuple(steps), tuple(wits))


@dataclass(frozen=True)
class ProbeReport:
    variant: str
    results: tuple  # ((N, passed, q or None), ...)
    verdict: bool
    scope: str = "probed range only"

    def to_json(self):
        return {
            "variant": self.variant,
            "verdict": self.verdict,
            "scope": self.scope,
            "results": [{"N": N, "pass": ok, "q": None if q is None else int_to_str(q)}
                        for N, ok, q in self.results],
        }


def membership_probe(zeta, phi: Phi, N_range, variant="Lphi", max_precision=MAX_PRECISION):
    """Check ``2 <= q(N) <= phi(N)`` for each N in range.

    ``Lphi`` passes when every N passes; ``Lphi*`` when some N passes and every
    later N in range passes too.
    """
    if variant not in ("Lphi", "Lphi*"):
        raise ValueError("variant must be 'Lphi' or 'Lphi*'")
    Ns = sorted(N_range)
    if not Ns:
        raise ValueError("empty N range")
    for N in Ns:
        phi.check_valid(N)
    results = []
    for N in Ns:
        found = witness_search(zeta, N, phi, max_precision=max_precision).witness
        results.append((N, found is not None, None if found is None else found.q))
    passes = [ok for _, ok, _ in results]
    if variant == "Lphi":
        verdict = all(passes)
    else:
        verdict = any(passes) and all(passes[passes.index(True):])
    return ProbeReport(variant, tuple(results), verdict)


# ---------------------------------------------------------------------------
# exponents omega(n) and (semi-)strong profiles

def convergent_distance(zeta, cf, n, max_precision=MAX_PRECISION) -> RationalInterval:
    """Enclosure of ``|t_n zeta - s_n|`` for a certified prefix cf of zeta (n+1 < len)."""
    s, t = cf.numerators[n], cf.denominators[n]
    t1 = cf.denominators[n + 1]
    # Lagrange: 1/(t_{n+1} + t_n) < |t_n zeta - s_n| < 1/t_{n+1}
    lagrange = RationalInterval(mpq(1, t1 + t), mpq(1, t1))
    k = 2 * int(t1.bit_length()) + 64
    iv = abs(zeta.enclosure(min(k, max_precision)) * t - s)
    try:
        return iv.intersect(lagrange)
    except ValueError:
        raise AssertionError("oracle inconsistent with its certified expansion") from None


def omega_enclosure(d: RationalInterval, t, precision=64) -> RationalInterval:
    """Enclosure of ``-log d / log t`` over the interval d (0 < d, t >= 2)."""
    if d.lo <= 0:
        raise PrecisionExhausted("distance not bounded away from zero")
    lo = log_ratio_enclosure(1 / d.hi, t, precision).lo
    hi = log_ratio_enclosure(1 / d.lo, t, precision).hi
    return RationalInterval(lo, hi)


@dataclass(frozen=True)
class StrongProfile:
    indices: tuple  # n with t_n >= 2
    omegas: tuple  # enclosure of omega(n) per index
    selected: tuple  # v_1, v_2, ...
    ratio_bounds: tuple  # enclosures of log t_{v_{i+1}} / log t_{v_i + 1}
    strong: bool
    semistrong: bool
    scope: str = "computed range only"


def strong_profile(zeta, n_terms, Lam, ratio_cap=None, max_precision=MAX_PRECISION) -> StrongProfile:
    """omega(n) for every certified convergent, greedy selection of ``v_i``.

    ``Lam`` is the table ``Lam(1), Lam(2), ...`` (a sequence or a callable on
    i >= 1). ``strong`` means every index qualified in turn; ``semistrong``
    means a subsequence qualified and, when ``ratio_cap`` is given, every
    computed ratio bound stays below it.
    """
    zeta = as_real(zeta)
    lam = Lam if callable(Lam) else (lambda i: Lam[i - 1])
    cf = cf_prefix(zeta, n_terms, max_precision=max_precision)
    idx, oms = [], []
    for n in range(len(cf) - 1):
        t = cf.denominators[n]
        if t < 2:
            continue
        d = convergent_distance(zeta, cf, n, max_precision)
        idx.append(n)
        oms.append(omega_enclosure(d, t))
    selected = []
    for n, om in zip(idx, oms):
        i = len(selected) + 1
        try:
            need = lam(i)
        except IndexError:
            break
        if om.lo >= need:
            selected.append(n)
    ratios = []
    for a, b in zip(selected, selected[1:]):
        if a + 1 < len(cf) and cf.denominators[a + 1] >= 2:
            ratios.append(log_ratio_enclosure(cf.denominators[b], cf.denominators[a + 1]))
    strong = selected == idx[: len(selected)] and len(selected) == len(idx)
    semistrong = len(selected) > 0 or not idx
    if ratio_cap is not None:
        semistrong = semistrong and all(r.hi <= ratio_cap for r in ratios)
    if not idx:
        strong = True
    return StrongProfile(tuple(idx), tuple(oms), tuple(selected), tuple(ratios), strong, semistrong)


# ---------------------------------------------------------------------------
# iterated exponentials

def _log_tower_compare(x_lo, x_hi, k, q, precision=64):
    """Compare ``x`` with ``exp^[k](q)`` for every ``x in [x_lo, x_hi]`` (x_lo > 0).

    ``x_hi = None`` stands for an unbounded range. Returns True when every x
    reaches the tower, False when none does, None when undecided.
    """
    lo = mpq(x_lo)
    hi = None if x_hi is None else mpq(x_hi)
    lo_known = True
    for _ in range(k):
        if hi is not None:
            if hi <= 0:
                return False  # x <= exp^[j](0) < exp^[k](q)
            hi = log_enclosure(hi, precision).hi
        if lo_known and lo > 0:
            lo = log_enclosure(lo, precision).lo
        else:
            lo_known = False
    if lo_known and lo >= q:
        return True
    if hi is not None and hi < q:
        return False
    return None


@dataclass(frozen=True)
class UltraResult:
    p: mpz | None
    q: mpz | None
    pruned: tuple  # q values whose test was out of reach of the bit budget
    scanned: int


def ultra_probe(zeta, k, q_max, max_precision=1 << 20) -> UltraResult:
    """First primitive ``p/q`` (``2 <= q <= q_max``) with ``|zeta - p/q| <= 1/exp^[k](q)``.

    For k >= 1 only convergents (plus q = 2 when k = 1) can qualify, because
    the bound then lies below ``1/(2 q^2)``.
    """
    zeta = as_real(zeta)
    k, q_max = int(k), mpz(q_max)
    if k < 0 or q_max < 1:
        raise DomainError("need k >= 0 and q_max >= 1")
    pruned, scanned = [], 0

    def candidates():
        extra = [mpz(2)] if k == 1 else []
        for _, s, t, _ in iter_convergent_denominators(zeta, max_precision):
            while extra and extra[0] <= t:
                q = extra.pop(0)
                if q != t:
                    r, _ = zeta.approx(64)
                    p, _ = nearest_integer(q * r)
                    for pp in (p - 1, p, p + 1):
                        yield pp, q
            if t > q_max:
                return
            yield s, t

    for p, q in candidates():
        if q < 2 or q > q_max or gcd(p, q) != 1:
            continue
        scanned += 1
        prec = 64
        verdict = None
        while prec <= max_precision:
            d = abs(zeta.enclosure(prec) - mpq(p, q))
            if d.hi == 0:
                raise RationalHit(f"zeta = {p}/{q}")
            if k == 0:
                verdict = True if d.hi * q <= 1 else (False if d.lo * q > 1 else None)
            else:
                verdict = _log_tower_compare(1 / d.hi, None if d.lo == 0 else 1 / d.lo, k, q)
            if verdict is not None:
                break
            prec *= 2
        if verdict is None:
            pruned.append(q)
        elif verdict:
            return UltraResult(p, q, tuple(pruned), scanned)
    return UltraResult(None, None, tuple(pruned), scanned)


# ---------------------------------------------------------------------------
# phi built from a threshold table

@dataclass(frozen=True)
class PhiChain:
    N: int
    iota: int
    chain: tuple  # T_0, T_1, ..., T_iota
    variant: str

    @property
    def D(self):
        return self.chain[self.iota]


def phi_from_lambda(Lam, N, variant="strong", budget_bits=1 << 25) -> PhiChain:
    """``D_N = T_iota`` with ``iota`` the first table index where ``Lam(i) >= N``.

    ``T_0 = 1``, ``T_1 = N + 1``; then ``T_{j+1} = T_j^(N+1)`` (strong) or
    ``T_{j+1} = T_j^(j(j+1))`` (semistrong).
    """
    if variant not in ("strong", "semistrong"):
        raise ValueError("variant must be 'strong' or 'semistrong'")
    N = int(N)
    table = list(Lam)
    if any(b < a for a, b in zip(table, table[1:])):
        raise ValueError("threshold table must be non-decreasing")
    iota = next((i for i, v in enumerate(table, 1) if v >= N), None)
    if iota is None:
        raise ValueError(f"table exhausted before reaching {N}")
    chain = [mpz(1), mpz(N + 1)]
    for j in range(1, iota):
        e = N + 1 if variant == "strong" else j * (j + 1)
        if chain[-1].bit_length() * e > budget_bits:
            raise BudgetExceeded(f"T_{j + 1} exceeds the bit budget",
                                 bits=chain[-1].bit_length() * e, budget=budget_bits)
        chain.append(chain[-1] ** e)
    return PhiChain(N, iota, tuple(chain[: iota + 1]), variant)


def phi_table_from_lambda(Lam, variant="strong"):
    """A ``Phi`` with ``phi(N) = D_N``."""
    return Phi(f"D_N[{variant}]", value_fn=lambda N: phi_from_lambda(Lam, N, variant).D)
