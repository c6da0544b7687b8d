"""Rational images of witnesses, the polynomial norm bound and the coprimality check."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

from gmpy2 import gcd, is_prime, lcm, mpq, mpz, next_prime

from .classes import Witness, witness_search, verify_witness
from .errors import BudgetExceeded, DomainError, PoleError, PrecisionExhausted, SufficiencyCheckFailed
from .exact import (
    RationalInterval,
    ceil,
    floor,
    log_enclosure,
    log_ratio_enclosure,
    nearest_integer,
    norm_enclosure,
    rat_from_json,
    rat_to_json,
)
from .reals import as_real, rational_map

MAX_PRECISION = 1 << 25


# ---------------------------------------------------------------------------
# polynomials (coefficient lists, constant term first)

def _trim(c):
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def poly_eval(c, x):
    acc = None
    for a in reversed(c):
        acc = a if acc is None else acc * x + a
    return acc


def poly_deriv(c):
    return [j * c[j] for j in range(1, len(c))] or [mpz(0)]


def poly_mul(a, b):
    out = [mpz(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_sub(a, b):
    n = max(len(a), len(b))
    a = list(a) + [0] * (n - len(a))
    b = list(b) + [0] * (n - len(b))
    return _trim([x - y for x, y in zip(a, b)])


def _eval_interval(c, J: RationalInterval) -> RationalInterval:
    """Interval value of the polynomial on J, summed monomial by monomial.

    Even powers of an interval straddling 0 stay non-negative this way, which
    Horner's scheme would lose.
    """
    acc = RationalInterval.point(c[0])
    for j in range(1, len(c)):
        if c[j]:
            acc = acc + (J ** j) * c[j]
    return acc


class RationalFunction:
    """``f = P/Q`` with integer coefficients and the common content removed."""

    def __init__(self, P, Q=(1,)):
        P, Q = [mpq(a) for a in P], [mpq(a) for a in Q]
        if not any(Q):
            raise ValueError("denominator polynomial is zero")
        den = reduce(lcm, (a.denominator for a in P + Q), mpz(1))
        P = [mpz(a * den) for a in P]
        Q = [mpz(a * den) for a in Q]
        content = reduce(gcd, (a for a in P + Q if a), mpz(0)) or mpz(1)
        self.P = _trim([a // content for a in P])
        self.Q = _trim([a // content for a in Q])

    @property
    def k(self) -> int:
        """Degree of the denominator."""
        return len(self.Q) - 1

    @property
    def degree(self) -> int:
        return max(len(self.P), len(self.Q)) - 1

    def is_constant(self) -> bool:
        # P/Q constant iff P*Q' == P'*Q
        return not any(poly_sub(poly_mul(self.P, poly_deriv(self.Q)), poly_mul(poly_deriv(self.P), self.Q)))

    def __call__(self, x):
        x = mpq(x)
        qv = poly_eval(self.Q, x)
        if qv == 0:
            raise PoleError(f"pole at {x}")
        return poly_eval(self.P, x) / qv

    def derivative_parts(self):
        """``(N, D)`` with ``f' = N / D``."""
        num = poly_sub(poly_mul(poly_deriv(self.P), self.Q), poly_mul(self.P, poly_deriv(self.Q)))
        return num, poly_mul(self.Q, self.Q)

    def derivative_bound(self, J: RationalInterval):
        """An exact upper bound ``U >= |f'(z)|`` for every z in J."""
        num, _ = self.derivative_parts()
        pieces = [J]
        for _ in range(8):
            vals = [_eval_interval(self.Q, piece) for piece in pieces]
            if all(v.lo > 0 or v.hi < 0 for v in vals):
                break
            pieces = [half for piece in pieces for half in
                      (RationalInterval(piece.lo, piece.mid), RationalInterval(piece.mid, piece.hi))]
        else:
            raise PoleError("denominator may vanish on the interval")
        U = mpq(0)
        for piece, qv in zip(pieces, vals):
            U = max(U, abs(_eval_interval(num, piece)).hi / (abs(qv).lo ** 2))
        return U

    def to_json(self):
        return {"P": [str(int(a)) for a in self.P], "Q": [str(int(a)) for a in self.Q]}

    @classmethod
    def from_json(cls, d):
        def coeff(a):
            return rat_from_json(a) if isinstance(a, dict) else mpq(mpz(a))
        return cls([coeff(a) for a in d["P"]], [coeff(a) for a in d.get("Q", ["1"])])

    def __repr__(self):
        return f"RationalFunction(P={[int(a) for a in self.P]}, Q={[int(a) for a in self.Q]})"


@dataclass(frozen=True)
class UnitFractionPolynomial:
    """``sum_j z^j / b_j`` with ``b_j | b_{j+1}``; then ``A = 1`` and ``B = b_m``."""

    denominators: tuple

    def __post_init__(self):
        bs = tuple(mpz(b) for b in self.denominators)
        object.__setattr__(self, "denominators", bs)
        if not bs:
            raise ValueError("need at least b_0")
        if any(b < 1 for b in bs):
            raise ValueError("denominators must be positive")
        for j, (a, b) in enumerate(zip(bs, bs[1:])):
            if b % a:
                raise ValueError(f"b_{j} = {a} does not divide b_{j + 1} = {b}")

    @property
    def m(self) -> int:
        return len(self.denominators) - 1

    @property
    def coefficients(self):
        return tuple(mpq(1, b) for b in self.denominators)

    @property
    def A(self):
        return mpz(1)

    @property
    def B(self):
        return self.denominators[-1]


def _as_rf(f):
    return f if isinstance(f, RationalFunction) else RationalFunction(*f)


# ---------------------------------------------------------------------------
# images of rational approximations

def transform_witness(f, p, q):
    """``f(p/q)`` as ``(p', q')`` in lowest terms with ``q' >= 1``."""
    f = _as_rf(f)
    p, q = mpz(p), mpz(q)
    if q < 1:
        raise DomainError("q must be positive")
    if gcd(p, q) != 1:
        raise DomainError("p and q must be coprime")
    v = f(mpq(p, q))
    return v.numerator, v.denominator


def exponent_of(q_img, q) -> RationalInterval:
    """Enclosure of ``log q' / log q``; a point when q' is an exact power of q."""
    q_img, q = mpz(q_img), mpz(q)
    if q < 2:
        raise DomainError("q must be at least 2")
    if q_img == 1:
        return RationalInterval.point(0)
    iv = log_ratio_enclosure(q_img, q)
    for j in range(int(floor(iv.lo)), int(ceil(iv.hi)) + 1):
        if j >= 1 and q ** j == q_img:
            return RationalInterval.point(j)
    return iv


@dataclass(frozen=True)
class ExponentAudit:
    exponents: tuple  # (q, q', enclosure)
    max_exponent: mpq
    eta: mpq
    passed: bool


def denominator_exponent_audit(f, witnesses, eta) -> ExponentAudit:
    """Certify ``q' <= q^eta`` for the image of every witness ``(p, q)``."""
    f = _as_rf(f)
    eta = mpq(eta)
    rows = []
    for w in witnesses:
        p, q = (w.p, w.q) if isinstance(w, Witness) else w
        if q < 2:
            raise DomainError("witness denominators must be at least 2")
        _, q_img = transform_witness(f, p, q)
        rows.append((mpz(q), q_img, exponent_of(q_img, q)))
    mx = max(r[2].hi for r in rows)
    return ExponentAudit(tuple(rows), mx, eta, mx <= eta)


@dataclass(frozen=True)
class ImageWitness:
    N: int
    source: Witness
    p: mpz
    q: mpz
    U: mpq
    distance_bound: mpq  # certified |f(zeta) - p'/q'| <= U |zeta - p/q|
    exponent_lower: mpq | None  # from the Lipschitz bound
    exponent: RationalInterval | None  # direct two-sided enclosure of -log||q' f(zeta)|| / log q'

    def to_json(self):
        return {"N": self.N, "form": "explicit", "q": str(int(self.source.q)), "p": str(int(self.source.p)),
                "q_image": str(int(self.q)), "p_image": str(int(self.p)), "U": rat_to_json(self.U),
                "distance_bound": rat_to_json(self.distance_bound),
                "exponent_lower": None if self.exponent_lower is None else rat_to_json(self.exponent_lower),
                "exponent": None if self.exponent is None else self.exponent.to_json()}


def lipschitz_interval(zeta, p, q, precision=64):
    """``J = [floor(zeta) - 1, ceil(zeta) + 1]``, widened to contain p/q."""
    iv = zeta.enclosure(precision)
    lo = min(floor(iv.lo) - 1, floor(mpq(p, q)))
    hi = max(ceil(iv.hi) + 1, ceil(mpq(p, q)))
    return RationalInterval(lo, hi)


def _image_exponent(fz, p_img, q_img, max_precision):
    """Two-sided enclosure of ``-log||q' f(zeta)|| / log q'`` (None if not resolved)."""
    if q_img < 2:
        return None
    k = 64 + 4 * int(q_img.bit_length())
    while k <= max_precision:
        d = abs(fz.enclosure(k) * q_img - p_img)
        if d.lo > 0 and d.hi < mpq(1, 2):
            lo = log_ratio_enclosure(1 / d.hi, q_img).lo
            hi = log_ratio_enclosure(1 / d.lo, q_img).hi
            return RationalInterval(lo, hi)
        k *= 2
    return None


# ---------------------------------------------------------------------------
# series reals: truncation witnesses kept in factored form

def _small_prime_factors(n, limit=1 << 16):
    """Prime factors of a positive integer by trial division; None if a large cofactor stays composite."""
    n, out, ell = mpz(abs(n)), [], mpz(2)
    while n > 1 and ell <= limit:
        if n % ell == 0:
            out.append(ell)
            while n % ell == 0:
                n //= ell
        ell = next_prime(ell)
    if n > 1:
        if not is_prime(n):
            return None
        out.append(n)
    return out


def _valuation(x, ell):
    v = 0
    while x and x % ell == 0:
        x //= ell
        v += 1
    return v


@dataclass(frozen=True)
class TruncationImageWitness:
    """Image of the truncation witness ``q = M^e`` of a series real under a polynomial map.

    The image denominator is ``q' = c M^(d e) / g`` and is never formed; every
    bound is an exact statement about integer exponents or a certified logarithm.
    """

    N: int
    n: int  # truncation index
    M: mpz
    e: int  # q = M^e
    c: mpz
    d: int
    g: mpz
    U: mpq  # sup |f'| near zeta
    u: mpq  # inf |f'| near zeta
    source_exponent: RationalInterval  # -log||q zeta|| / log q
    denominator_exponent: RationalInterval  # log q' / log q
    log_q_img: RationalInterval  # ln q'
    exponent: RationalInterval  # -log||q' f(zeta)|| / log q'

    @property
    def exponent_lower(self):
        return self.exponent.lo

    def to_json(self):
        return {"N": self.N, "form": "truncation", "n": self.n, "M": str(int(self.M)), "e": str(self.e),
                "c": str(int(self.c)), "d": self.d, "g": str(int(self.g)),
                "U": rat_to_json(self.U), "u": rat_to_json(self.u),
                "source_exponent": self.source_exponent.to_json(),
                "denominator_exponent": self.denominator_exponent.to_json(),
                "exponent": self.exponent.to_json()}


def _truncation_index(sd, N, n_max=4096):
    """Least n whose truncation is a primitive witness at level N, proved from the exponents alone.

    ``||M^e_n zeta|| <= 2 b M^(e_n - e_(n+1))`` (b the digit bound), which is below
    ``M^(-N e_n)`` as soon as ``2 b < M^X`` with ``X = e_(n+1) - (N+1) e_n``.
    """
    for n in range(1, n_max + 1):
        if gcd(sd.a(n), sd.M) != 1:  # p = a_n mod M must be a unit
            continue
        X = int(sd.e(n + 1)) - (N + 1) * int(sd.e(n))
        if X <= 0:
            continue
        two_b = 2 * sd.digit_bound
        if X * (int(sd.M.bit_length()) - 1) > int(two_b.bit_length()) or two_b < sd.M ** X:
            return n
    raise BudgetExceeded(f"no truncation witness at level {N} within {n_max} terms")


def _truncation_image(f: "RationalFunction", zeta, N, precision=96):
    sd = zeta.series
    c = f.Q[0]
    P = [a if c > 0 else -a for a in f.P]
    c = abs(c)
    d = len(P) - 1
    n = _truncation_index(sd, N)
    e, e_next = int(sd.e(n)), int(sd.e(n + 1))
    M = sd.M
    w = precision + 2 * int(mpz(max(d, 1) * e_next).bit_length())
    lnM = log_enclosure(M, w)

    # q' = c q^d / g with g = gcd(A, c q^d), A = sum P_i p^i q^(d-i); only residues are needed
    g = mpz(1)
    primes = _small_prime_factors(c * M)
    if primes is None:
        raise DomainError("cannot factor the leading denominator")
    for ell in primes:
        v_den = _valuation(c, ell) + d * e * _valuation(M, ell)
        j = min(v_den, 64)
        mod = ell ** j
        p_r, _ = sd.truncation(n, mod)
        q_r = pow(M, e, mod)
        A = sum(mpz(a) * pow(p_r, i, mod) * pow(q_r, d - i, mod) for i, a in enumerate(P)) % mod
        v = _valuation(A, ell) if A else j
        if v >= j and j < v_den:
            raise DomainError("image gcd not resolved by residues")
        g *= ell ** min(v, v_den)
    log_q_img = log_enclosure(c, w) + lnM * (d * e) - log_enclosure(g, w)

    # |zeta - p/q| = delta in [a_(n+1), 2 b] M^(-e_(n+1))
    ln_delta = RationalInterval(log_enclosure(sd.a(n + 1), w).lo,
                                log_enclosure(2 * sd.digit_bound, w).hi) - lnM * e_next
    lnq = lnM * e
    src = -(lnq + ln_delta) / lnq

    # f(zeta) - f(p/q) = f'(xi) delta with xi between p/q and zeta
    iv = zeta.enclosure(64)
    r = mpq(2 * sd.digit_bound, M ** min(e_next, 64))
    J = RationalInterval(iv.lo - r, iv.hi)
    fp = _eval_interval(poly_deriv(P), J) / c
    if fp.lo <= 0 <= fp.hi:
        raise DomainError("f' may vanish near zeta")
    fp = abs(fp)
    ln_dist = RationalInterval(log_enclosure(fp.lo, w).lo, log_enclosure(fp.hi, w).hi) + ln_delta
    ln_norm = log_q_img + ln_dist
    if not ln_norm.hi < log_enclosure(mpq(1, 2), w).lo:
        raise DomainError("image norm not certified below 1/2")
    if not log_q_img.lo > 0:
        raise DomainError("image denominator is 1")
    return TruncationImageWitness(N, n, M, e, c, d, g, fp.hi, fp.lo, src, log_q_img / lnq, log_q_img,
                                  -ln_norm / log_q_img)


def maillet_image_witnesses(f, zeta, N_list, q_max=None, max_precision=MAX_PRECISION, method="auto"):
    """Carry a witness of zeta at each N to ``f(zeta)``.

    The image error is certified through ``|f(zeta) - f(p/q)| <= U |zeta - p/q|``
    with ``U`` an exact bound on ``|f'|`` over a compact interval containing both
    points. When that interval meets a pole, the hull of the two points is used.

    ``method="truncation"`` (the default for a series real under a polynomial map)
    uses the series truncations as witnesses and returns
    :class:`TruncationImageWitness` records whose sizes stay symbolic; ``"search"``
    scans convergents for the least witness at each level.
    """
    f = _as_rf(f)
    zeta = as_real(zeta)
    if f.is_constant():
        raise DomainError("f must be non-constant")
    if method == "auto":
        method = "truncation" if zeta.series is not None and f.k == 0 and q_max is None else "search"
    if method == "truncation":
        if zeta.series is None or f.k != 0:
            raise DomainError("truncation witnesses need a series real and a polynomial map")
        return [_truncation_image(f, zeta, N) for N in N_list]
    fz = rational_map(zeta, f.P, f.Q, max_precision=max_precision)
    out = []
    for N in N_list:
        w = witness_search(zeta, N, q_max, max_precision=max_precision).witness
        if w is None:
            out.append(None)
            continue
        p_img, q_img = transform_witness(f, w.p, w.q)
        dist = w.norm / w.q  # |zeta - p/q|
        J = lipschitz_interval(zeta, w.p, w.q)
        try:
            U = f.derivative_bound(J)
        except PoleError:
            near = zeta.enclosure(64 + 2 * int(w.q.bit_length()))
            J = near.hull(mpq(w.p, w.q))
            U = f.derivative_bound(J)
        bound = U * dist
        lower = None
        if q_img >= 2 and bound > 0 and q_img * bound < 1:
            lower = log_ratio_enclosure(1 / (q_img * bound), q_img).lo
        out.append(ImageWitness(N, w, p_img, q_img, U, bound, lower,
                                _image_exponent(fz, p_img, q_img, max_precision)))
    return out


# ---------------------------------------------------------------------------
# the polynomial norm bound

def _poly_constants(coeffs):
    """``(A, B)``: B clears every denominator, A bounds every numerator."""
    cs = [mpq(c) for c in coeffs]
    B = reduce(lcm, (c.denominator for c in cs), mpz(1))
    A = max((abs(c.numerator) for c in cs), default=mpz(0))
    return A, B


def lemma_bound(coeffs, alpha_abs, q, nu):
    """Closed form ``m^2 (1+|alpha|)^(m-1) A B q^(-nu+m-1)`` (0 for constants)."""
    coeffs = _trim([mpq(c) for c in coeffs])
    m = len(coeffs) - 1
    if m == 0:
        return mpq(0)
    A, B = _poly_constants(coeffs)
    return mpq(m * m) * (1 + mpq(alpha_abs)) ** (m - 1) * A * B * mpq(q) ** (m - 1 - nu)


@dataclass(frozen=True)
class GrobResult:
    Q_big: mpz  # B q^m
    bound: mpq
    verified: bool | None
    norm: RationalInterval | None  # enclosure of ||B q^m P(alpha)||
    monomial_checks: tuple  # per k >= 1: (distance upper bound, lemma bound)


def grob_bound(P, alpha, q, nu, verify=False, max_precision=MAX_PRECISION) -> GrobResult:
    """``||B q^m P(alpha)|| <= m^2 (1+|alpha|)^(m-1) A B q^(-nu+m-1)``.

    ``P`` is a coefficient list or a ``UnitFractionPolynomial``. The
    hypothesis ``||q alpha|| <= min(q^-nu, 1/2)`` is checked first; with
    ``verify`` every monomial bound is checked against exact enclosures.
    """
    coeffs = list(P.coefficients) if isinstance(P, UnitFractionPolynomial) else [mpq(c) for c in P]
    coeffs = _trim(coeffs)
    alpha = as_real(alpha)
    q, nu = mpz(q), int(nu)
    m = len(coeffs) - 1
    A, B = _poly_constants(coeffs)
    if isinstance(P, UnitFractionPolynomial):
        A, B = P.A, P.B
    Q_big = B * q ** m
    if m == 0:
        return GrobResult(Q_big, mpq(0), True if verify else None, RationalInterval.point(0), ())
    k = int(q.bit_length()) * (nu + m + 1) + 64
    while True:
        iv = alpha.enclosure(k)
        p, dist = norm_enclosure(iv * q)
        if p is not None and (dist.hi <= mpq(1, q ** nu) or dist.lo > mpq(1, q ** nu)):
            break
        if k > max_precision:
            raise PrecisionExhausted("||q alpha|| against q^-nu undecided")
        k *= 2
    if dist.lo > mpq(1, q ** nu) or dist.hi > mpq(1, 2):
        raise DomainError("hypothesis ||q alpha|| <= q^-nu fails")
    abs_alpha = abs(iv).hi
    bound = lemma_bound(coeffs, abs_alpha, q, nu)
    if not verify:
        return GrobResult(Q_big, bound, None, None, ())
    checks = []
    total = RationalInterval.point(0)
    ok = True
    qa = iv * q
    for j in range(1, m + 1):
        c = coeffs[j] * B
        if c == 0:
            checks.append((mpq(0), mpq(0)))
            continue
        # |B c_j q^m alpha^j - B c_j q^(m-j) p^j| = |c| q^(m-j) |(q alpha)^j - p^j|
        dev = abs(qa ** j - p ** j) * (abs(c) * q ** (m - j))
        lemma = abs(c) * j * (1 + abs_alpha) ** (j - 1) * mpq(q) ** (m - 1 - nu)
        checks.append((dev.hi, lemma))
        ok = ok and dev.hi <= lemma
        total = total + dev
    value = RationalInterval.point(poly_eval([c * B for c in coeffs], 0) * q ** m)
    for j in range(1, m + 1):
        value = value + (qa ** j) * (coeffs[j] * B * q ** (m - j))
    _, norm = norm_enclosure(value)
    ok = ok and norm.hi <= bound
    return GrobResult(Q_big, bound, ok, norm, tuple(checks))


# ---------------------------------------------------------------------------
# coprimality of the image numerator

@dataclass(frozen=True)
class RelativprimResult:
    p: mpz
    q: mpz
    Z: tuple  # Z_k = q^(m-k) p^k d_k
    R: mpz
    gcd: mpz
    margin: mpq  # 1/2 minus the summed monomial distances


def relativprim_check(P: UnitFractionPolynomial, alpha, q, nu=None, max_precision=MAX_PRECISION):
    """``R``, the nearest integer to ``B q^m P(alpha)``, and ``gcd(q, R)``.

    Instead of an a-priori threshold on nu, the identities ``Z_k = q^(m-k) p^k d_k``
    (``d_k = B / b_k``) are checked exactly: each monomial lies within its own
    distance of ``Z_k`` and the distances sum to less than 1/2.
    """
    if not isinstance(P, UnitFractionPolynomial):
        P = UnitFractionPolynomial(tuple(P))
    alpha = as_real(alpha)
    q = mpz(q)
    if q < 2:
        raise DomainError("q must be at least 2")
    m, B = P.m, P.B
    d = [B // b for b in P.denominators]
    k = int(q.bit_length()) * (m + 2) + 64 + (0 if nu is None else int(q.bit_length()) * int(nu))
    while True:
        iv = alpha.enclosure(k)
        p, _ = norm_enclosure(iv * q)
        if p is not None:
            if gcd(p, q) != 1:
                raise DomainError(f"gcd(p, q) = {gcd(p, q)} for the nearest integer p = {p}")
            qa = iv * q
            Z = [q ** (m - j) * p ** j * d[j] for j in range(m + 1)]
            dev = [abs(qa ** j - p ** j) * (q ** (m - j) * d[j]) for j in range(m + 1)]
            total = sum((x.hi for x in dev), mpq(0))
            if total < mpq(1, 2):
                R = sum(Z, mpz(0))
                g = gcd(q, R)
                if g != 1:
                    raise AssertionError("coprimality failed after a passing sufficiency check")
                return RelativprimResult(p, q, tuple(Z), R, g, mpq(1, 2) - total)
            exact_total = sum((x.lo for x in dev), mpq(0))
            if exact_total >= mpq(1, 2):
                raise SufficiencyCheckFailed(
                    f"monomial distances sum to at least 1/2: nu too small for q = {q}")
        if k > max_precision:
            raise PrecisionExhausted("sufficiency check undecided")
        k *= 2
