"""An entire transcendental function with rational Taylor coefficients that maps
Liouville numbers (with a prescribed witness bound) to Liouville numbers.

``f(z) = sum_j z^j / b_j`` is built stage by stage. Stage m fixes ``k_m``, picks
a witness ``q_m`` with ``||q_m zeta|| <= q_m^(-k_m)`` and then chooses
``b_{m+1}``, a multiple of ``m! b_m`` large enough that every later coefficient
is dominated by the constraints of every earlier stage. Stage certificates
then show ``||Q_m f(zeta)|| <= Q_m^(-m)`` with ``Q_m = b_m q_m^m``.

Two modes:

* ``co-construct``: zeta is a continued fraction grown together with f, with
  witnesses at convergent denominators ``q <= 2^(k_m)`` (so ``phi(N) = 2^N``);
* ``analytic``: zeta and a bound ``phi`` are given; stages stop when
  ``phi(k_m)`` no longer fits the bit budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from gmpy2 import gcd, mpq, mpz

from .classes import Phi, named_phi, verify_witness, witness_search
from .contfrac import CFExpansion
from .errors import BudgetExceeded, DomainError, PrecisionExhausted, SufficiencyCheckFailed
from .exact import (
    RationalInterval,
    int_to_str,
    log_ratio_enclosure,
    nearest_integer,
    rat_from_json,
    rat_to_json,
    str_to_int,
)
from .reals import ComputableReal, as_real, cf_real, real_from_descriptor

DEFAULT_BUDGET = 1 << 25
FRESH_WITNESS_BUDGET = 1 << 16


# ---------------------------------------------------------------------------
# bit-size bounds for quantities too large to form

def ub_log2(x) -> int:
    """An integer u with ``x < 2^u`` (x > 0 rational)."""
    x = mpq(x)
    return int(x.numerator.bit_length()) - int(x.denominator.bit_length()) + 1


def lb_log2(x) -> int:
    """An integer l with ``x >= 2^l`` (x > 0 rational)."""
    x = mpq(x)
    return int(x.numerator.bit_length()) - 1 - int(x.denominator.bit_length())


def falling_up(j, s):
    """``(j+1)(j+2)...(j+s)``."""
    out = mpz(1)
    for i in range(1, s + 1):
        out *= j + i
    return out


# ---------------------------------------------------------------------------
# stage constants

def E_of(m: int, s_max: int) -> int:
    """Exponent on tau_m in the coefficient constraints: m+1, or m^2+1 with derivatives."""
    return m + 1 if s_max == 0 else m * m + 1


def D_of(m, T, B) -> mpz:
    """``D_m = 2 m^2 (T_m + 1)^(m-1) B_m^(m+1)``."""
    return 2 * mpz(m) ** 2 * (mpz(T) + 1) ** (m - 1) * mpz(B) ** (m + 1)


def choose_k(m, b_m, T_m, k_prev=0):
    """Least k with ``2^k > 2^(m^2+m-1) D_m``, raised above ``k_prev`` if needed.

    For q >= 2 the gap ``q^k / q^(m^2+m-1)`` grows with q, so q = 2 decides.
    Returns ``(k_m, D_m)``.
    """
    D = D_of(m, T_m, b_m)
    k = (m * m + m - 1) + int(D.bit_length())
    return max(k, k_prev + 1), D


def hbed_threshold(m, h, T, tau, E):
    """``4 (1+T_m)^(m+2h) tau_m^E``: coefficient ``b_{m+h}`` must exceed this."""
    return 4 * (mpz(T) + 1) ** (m + 2 * h) * mpz(tau) ** E


def hbed_threshold_bits(m, h, T, tau, E) -> int:
    """Upper bound on the bit length of ``hbed_threshold``."""
    return 2 + (m + 2 * h) * int((mpz(T) + 1).bit_length()) + E * int(mpz(tau).bit_length())


def chain_divisor(m, b_m, s_max):
    """``b_{m+1}`` must be a multiple of this: ``m! b_m``, or ``(m+1)! b_m`` with derivatives."""
    return math.factorial(m + (1 if s_max else 0)) * mpz(b_m)


def choose_b_next(m, b_m, constraints, s_max, budget_bits=DEFAULT_BUDGET):
    """Least multiple of the chain divisor strictly above every active threshold.

    ``constraints`` lists ``(m', T_m', tau_m', E(m'))`` for every stage m' <= m;
    the one for stage m' applies with ``h = m + 1 - m'``.
    """
    need_bits = max(hbed_threshold_bits(mp, m + 1 - mp, T, tau, E) for mp, T, tau, E in constraints)
    if need_bits > budget_bits:
        raise BudgetExceeded(f"b_{m + 1} would need about {need_bits} bits", bits=need_bits,
                             budget=budget_bits)
    bound = mpz(math.factorial(m + 1))
    for mp, T, tau, E in constraints:
        bound = max(bound, hbed_threshold(mp, m + 1 - mp, T, tau, E))
    div = chain_divisor(m, b_m, s_max)
    return (bound // div + 1) * div


# ---------------------------------------------------------------------------
# co-constructed zeta

class CoZeta:
    """Continued fraction grown stage by stage, with one adjustable quotient.

    The witness of the current stage is the convergent denominator ``t_n``; the
    quotient ``r_{n+1}`` after it stays *pending* and is raised until
    ``t_{n+1} >= q^k``, which gives ``||t_n zeta|| < 1/t_{n+1} <= t_n^-k``.
    Once finished, quotients beyond the head follow ``r_{n+1} = t_n^n``.
    """

    def __init__(self, seed=(0, 2), fresh_budget=FRESH_WITNESS_BUDGET):
        self.r = [mpz(x) for x in seed]
        if len(self.r) < 2 or any(x < 1 for x in self.r[1:]):
            raise ValueError("seed needs r_0 and at least one positive quotient")
        self.pending = None  # index of the pending quotient
        self.fresh_budget = fresh_budget

    def _convergents(self, upto=None):
        cf = CFExpansion(self.r if upto is None else self.r[:upto])
        return cf.numerators, cf.denominators

    def _raise_pending(self, q, k):
        j = self.pending
        _, t = self._convergents(j)
        t_prev = t[j - 2] if j >= 2 else mpz(0)
        need = q ** k - t_prev
        r = max(mpz(1), -((-need) // q))
        self.r[j] = max(self.r[j], r)

    def witness_for(self, k):
        """Arrange a witness for exponent k; returns its convergent index n."""
        if self.pending is None:
            n = len(self.r) - 1
            self.r.append(mpz(1))
            self.pending = n + 1
        else:
            _, t = self._convergents(self.pending + 1)
            fresh = t[self.pending]
            if int(fresh.bit_length()) * k <= self.fresh_budget:
                self.r.append(mpz(1))
                self.pending += 1
        n = self.pending - 1
        _, t = self._convergents(n + 1)
        self._raise_pending(t[n], k)
        return n

    def convergent(self, n):
        s, t = self._convergents(n + 1)
        return s[n], t[n]

    def descriptor(self):
        return {"kind": "cf", "quotients": [int_to_str(x) for x in self.r], "tail": "t_n^n"}

    def real(self) -> ComputableReal:
        return zeta_from_descriptor(self.descriptor())


def zeta_from_descriptor(d) -> ComputableReal:
    """Head quotients followed by ``r_{n+1} = t_n^n``."""
    head = [str_to_int(x) for x in d["quotients"]]
    if d.get("tail", "t_n^n") != "t_n^n":
        raise ValueError(f"unsupported tail rule {d.get('tail')!r}")
    holder = {}

    def quotient(i):
        if i < len(head):
            return head[i]
        t = holder["real"].cf.denominators
        n = i - 1
        return max(mpz(1), t[n] ** n)

    real = cf_real(quotient, dict(d))
    holder["real"] = real
    return real


# ---------------------------------------------------------------------------
# the function

@dataclass(frozen=True)
class Stage:
    """Stage m: ``k_m``, ``D_m``, ``tau_m`` and the witness ``(p, q)``."""

    m: int
    k: int
    D: mpz
    T: int
    tau: mpz
    E: int
    q: mpz
    p: mpz


@dataclass
class HauptFunction:
    """``f(z) = sum_j z^j / b_j`` with the stage data that justifies it.

    ``b`` holds ``b_0 .. b_{M'}`` (``M' = M+1`` when the closing coefficient fits
    the budget, else ``M``); coefficients past ``M'`` exist only through the
    stage constraints they are bound to satisfy.
    """

    mode: str
    s_max: int
    b: list
    stages: list = field(default_factory=list)
    phi_name: str = "2^x"
    zeta_descriptor: dict | None = None
    truncation: str | None = None

    @property
    def M(self) -> int:
        return len(self.stages)

    def stage(self, m) -> Stage:
        if not 1 <= m <= self.M:
            raise DomainError(f"stage {m} not built (stages 1..{self.M})")
        return self.stages[m - 1]

    def coefficient(self, j):
        if j >= len(self.b):
            raise DomainError(f"coefficient c_{j} not built")
        return mpq(1, self.b[j])

    def P(self, m):
        """Denominators of the Taylor polynomial ``P_m``."""
        if m >= len(self.b):
            raise DomainError(f"P_{m} needs b_{m}")
        return tuple(self.b[: m + 1])

    def derivative_denominators(self, m, s):
        """``b_j^(s) = b_{j+s} j!/(j+s)!`` for j <= m: ``P_m^(s)`` has these unit fractions."""
        if m + s >= len(self.b):
            raise DomainError(f"derivative order {s} at stage {m} needs b_{m + s}")
        out = []
        for j in range(m + 1):
            num = self.b[j + s]
            den = falling_up(j, s)
            if num % den:
                raise AssertionError(f"b_{j + s} not divisible by {den}")
            out.append(num // den)
        return tuple(out)

    def to_manifest(self) -> dict:
        return {
            "mode": self.mode,
            "stages": self.M,
            "s_max": self.s_max,
            "b": [int_to_str(x) for x in self.b],
            "k": [st.k for st in self.stages],
            "T": [st.T for st in self.stages],
            "tau": [int_to_str(st.tau) for st in self.stages],
            "witnesses": [{"q": int_to_str(st.q), "p": int_to_str(st.p)} for st in self.stages],
            "phi_table": {"name": self.phi_name,
                          "k": [st.k for st in self.stages]},
            "zeta": self.zeta_descriptor,
            "truncation": self.truncation,
        }

    @classmethod
    def from_manifest(cls, d) -> "HauptFunction":
        s_max = int(d["s_max"])
        b = [str_to_int(x) for x in d["b"]]
        stages = []
        for i, (k, T, tau, w) in enumerate(zip(d["k"], d["T"], d["tau"], d["witnesses"])):
            m = i + 1
            stages.append(Stage(m, int(k), D_of(m, T, b[m]), int(T), str_to_int(tau),
                                E_of(m, s_max), str_to_int(w["q"]), str_to_int(w["p"])))
        f = cls(d["mode"], s_max, b, stages, d.get("phi_table", {}).get("name", "2^x"),
                d.get("zeta"), d.get("truncation"))
        audit(f)
        return f


def audit(f: HauptFunction):
    """Re-check divisibility, the k_m inequality and every coefficient constraint."""
    b = f.b
    if b[0] != 1:
        raise AssertionError("b_0 must be 1")
    for m in range(1, len(b) - 1):
        div = chain_divisor(m, b[m], f.s_max)
        if b[m + 1] % div:
            raise AssertionError(f"chain divisor does not divide b_{m + 1}")
    k_prev = 0
    for st in f.stages:
        m = st.m
        if st.D != D_of(m, st.T, b[m]):
            raise AssertionError(f"D_{m} mismatch")
        if not (mpz(1) << st.k) > (mpz(1) << (m * m + m - 1)) * st.D or st.k <= k_prev:
            raise AssertionError(f"k_{m} fails its inequality")
        k_prev = st.k
        for j in range(m + 1, len(b)):
            h = j - m
            if b[j] <= math.factorial(j):
                raise AssertionError(f"b_{j} <= {j}!")
            if int(b[j].bit_length()) - 1 > hbed_threshold_bits(m, h, st.T, st.tau, st.E):
                continue
            if b[j] <= hbed_threshold(m, h, st.T, st.tau, st.E):
                raise AssertionError(f"b_{j} violates the stage-{m} constraint")
    return True


def build(mode="co-construct", M=4, s_max=0, b1=2, zeta=None, phi=None,
          budget_bits=DEFAULT_BUDGET, seed=(0, 2), fresh_budget=FRESH_WITNESS_BUDGET,
          T=lambda m: m, max_precision=None):
    """Run M stages; returns ``(f, zeta)``.

    Analytic mode stops early (recording ``f.truncation``) once ``phi(k_m)`` or
    the operands it implies exceed ``budget_bits``. The closing coefficient
    ``b_{M+1}`` is formed only when it fits a quarter of the budget.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if s_max < 0:
        raise ValueError("s_max must be non-negative")
    if mode not in ("co-construct", "analytic"):
        raise ValueError(f"unknown mode {mode!r}")
    b = [mpz(1), mpz(b1)]
    if b[1] < 1:
        raise ValueError("b_1 must be positive")
    co = None
    if mode == "co-construct":
        co = CoZeta(seed, fresh_budget)
        phi_name = "2^x"
    else:
        if zeta is None or phi is None:
            raise ValueError("analytic mode needs zeta and phi")
        zeta = as_real(zeta)
        phi = named_phi(phi) if isinstance(phi, str) else phi
        phi_name = phi.name
    stages, truncation = [], None
    for m in range(1, M + 1):
        T_m = int(T(m))
        k, D = choose_k(m, b[m], T_m, stages[-1].k if stages else 0)
        E = E_of(m, s_max)
        if co is not None:
            n = co.witness_for(k)
            p, q = co.convergent(n)
            tau = b[m] << (k * m)
        else:
            if phi.base is not None:
                bits = int(phi.exponent(k)) * int(phi.base.bit_length())
            else:
                bits = int(phi.value(k).bit_length())
            if bits * m > budget_bits:
                size = str(bits) if bits < 1 << 64 else f"2^{bits.bit_length() - 1}"
                truncation = (f"stage {m}: phi(k_{m}) = phi({k}) needs at least {size} bits, "
                              f"over the {budget_bits}-bit budget")
                break
            bound = phi.value(k)
            kw = {} if max_precision is None else {"max_precision": max_precision}
            res = witness_search(zeta, k, q_max=bound, **kw)
            if res.witness is None:
                truncation = f"stage {m}: no witness q <= phi({k}) with exponent {k}"
                break
            p, q = res.witness.p, res.witness.q
            tau = b[m] * bound ** m
        stages.append(Stage(m, k, D, T_m, tau, E, q, p))
        constraints = [(st.m, st.T, st.tau, st.E) for st in stages]
        try:
            b_next = choose_b_next(m, b[m], constraints, s_max,
                                   budget_bits // 4 if m == M else budget_bits)
        except BudgetExceeded as exc:
            if m == M:
                break
            truncation = f"stage {m}: {exc}"
            break
        b.append(b_next)
    if not stages:
        raise BudgetExceeded(truncation or "no stage fits the budget", budget=budget_bits)
    zeta_out = co.real() if co is not None else zeta
    desc = co.descriptor() if co is not None else zeta.descriptor
    f = HauptFunction(mode, s_max, b, stages, phi_name, desc, truncation)
    audit(f)
    return f, zeta_out


# ---------------------------------------------------------------------------
# tail bounds

SYMBOLIC_CUTOFF = 1 << 20  # tau^E is formed exactly only below this many bits
RELAX_FLOOR = 4096  # tiny symbolic tails are rounded up to 2^-max(this, 64 + built size)


@dataclass(frozen=True)
class TailBound:
    """``|f^(s)(x) - P_m^(s)(x)| <= built + C * tau^-E`` for ``|x| <= xabs``.

    ``built`` sums the formed coefficients exactly; the rest is bounded through
    the constraint of stage ``m + s`` that every later coefficient obeys.
    """

    built: mpq
    C: mpq
    tau: mpz
    E: int

    def scaled_upper(self, scale) -> mpq:
        """A rational upper bound on ``scale * (built + C tau^-E)``."""
        scale = mpq(scale)
        exact = scale * self.built
        if self.C == 0:
            return exact
        if self.E * int(self.tau.bit_length()) <= SYMBOLIC_CUTOFF:
            return exact + scale * self.C / self.tau ** self.E
        u = ub_log2(scale * self.C) - self.E * (int(self.tau.bit_length()) - 1)
        if u >= 0:
            return exact + (mpz(1) << u)
        floor_bits = max(RELAX_FLOOR, int(exact.denominator.bit_length()) + 64)
        return exact + mpq(1, mpz(1) << min(-u, floor_bits))


def tail_bound(tail_dens, m, s, xabs, m_star, T_star, tau_star, E_star) -> TailBound:
    """Tail of ``P_m^(s)`` at ``|x| <= xabs``.

    ``tail_dens[i]`` is ``b_{m+1+s+i}``; later coefficients ``b_j`` are bounded by
    the constraint of stage ``m_star`` (``j = m_star + h``), whose constants
    ``T_star, tau_star, E_star`` are given. Uses ``|x| <= 1 + T_star`` and
    ``(m_star+h)^s <= (m_star+1)^s 2^(s(h-1))``.
    """
    xabs = mpq(xabs)
    if xabs > T_star + 1:
        raise DomainError("|x| exceeds the stage interval")
    built = mpq(0)
    for idx, bj in enumerate(tail_dens):
        i = m + 1 + idx
        built += falling_up(i, s) * xabs ** i / bj
    last = m + s + len(tail_dens)
    h0 = last - m_star + 1
    if h0 < 1:
        raise DomainError("the bounding stage lies beyond the formed coefficients")
    y = mpq(2 ** s, T_star + 1)
    if y >= 1:
        raise DomainError(f"tail series ratio {y} is not below 1")
    C = mpq(1, 4) * mpq(m_star + 1) ** s / mpq(T_star + 1) ** s / 2 ** s * y ** h0 / (1 - y)
    return TailBound(built, C, mpz(tau_star), int(E_star))


def _tail_for(f: HauptFunction, m, s, xabs) -> TailBound:
    last = f.stage(f.M)
    dens = [f.b[j] for j in range(m + 1 + s, len(f.b))]
    return tail_bound(dens, m, s, xabs, last.m, last.T, last.tau, last.E)


def eval_with_tail(f: HauptFunction, x, m, s=0) -> RationalInterval:
    """Enclosure of ``f^(s)(x)`` for x in ``[-T_m, T_m]``: ``P_m^(s)(x)`` plus a tail interval."""
    if not isinstance(x, RationalInterval):
        x = RationalInterval.point(mpq(x))
    T = f.stage(m).T
    if x.lo < -T or x.hi > T:
        raise DomainError(f"x outside [-T_{m}, T_{m}] = [-{T}, {T}]")
    dens = f.derivative_denominators(m, s)
    acc = None
    for b in reversed(dens):
        c = RationalInterval.point(mpq(1, b))
        acc = c if acc is None else acc * x + c
    xabs = max(abs(x.lo), abs(x.hi))
    tb = _tail_for(f, m, s, xabs).scaled_upper(1)
    return acc + RationalInterval(-tb, tb)


# ---------------------------------------------------------------------------
# stage certificates

@dataclass(frozen=True)
class StageCertificate:
    """``||Q f^(s)(zeta)|| <= Q^-m`` with ``Q = B q^m``, both halves under ``Q^-m / 2``.

    ``drauf_margin`` is ``1/2 - Q^m |Q P(zeta) - R|`` and ``tail_margin`` is
    ``1/2 - Q^(m+1) * tail``; both are exact positive rationals.
    """

    m: int
    s: int
    q: mpz
    p: mpz
    k: int
    dens: tuple  # b_j^(s), j = 0..m
    tail_dens: tuple  # b_j for j = m+1+s .. last built
    T: int
    m_star: int
    T_star: int
    tau_star: mpz
    E_star: int
    Q: mpz
    R: mpz
    Z: tuple
    zeta: dict
    precision_bits: int
    zeta_lo: mpq
    zeta_hi: mpq
    distance_upper: mpq
    drauf_margin: mpq
    tail_margin: mpq
    relativprim_margin: mpq
    witness_precision: int
    gcd: mpz

    @property
    def margin(self) -> mpq:
        """Exact slack ``1 - Q^m * (upper bound on ||Q f^(s)(zeta)||)``."""
        return self.drauf_margin + self.tail_margin

    @property
    def holds(self) -> bool:
        return self.drauf_margin > 0 and self.tail_margin > 0 and self.gcd == 1

    def to_json(self) -> dict:
        return {
            "kind": "stage_certificate",
            "m": self.m, "s": self.s,
            "q": int_to_str(self.q), "p": int_to_str(self.p), "k": self.k,
            "dens": [int_to_str(x) for x in self.dens],
            "tail_dens": [int_to_str(x) for x in self.tail_dens],
            "T": self.T, "m_star": self.m_star, "T_star": self.T_star,
            "tau_star": int_to_str(self.tau_star), "E_star": self.E_star,
            "Q": int_to_str(self.Q), "R": int_to_str(self.R),
            "Z": [int_to_str(x) for x in self.Z],
            "zeta": self.zeta,
            "precision_bits": self.precision_bits,
            "zeta_lo": rat_to_json(self.zeta_lo), "zeta_hi": rat_to_json(self.zeta_hi),
            "distance_upper": rat_to_json(self.distance_upper),
            "drauf_margin": rat_to_json(self.drauf_margin),
            "tail_margin": rat_to_json(self.tail_margin),
            "relativprim_margin": rat_to_json(self.relativprim_margin),
            "witness_precision": self.witness_precision,
            "gcd": int_to_str(self.gcd),
        }

    @classmethod
    def from_json(cls, d) -> "StageCertificate":
        if d.get("kind") != "stage_certificate":
            raise ValueError("not a stage certificate")
        return cls(
            int(d["m"]), int(d["s"]), str_to_int(d["q"]), str_to_int(d["p"]), int(d["k"]),
            tuple(str_to_int(x) for x in d["dens"]), tuple(str_to_int(x) for x in d["tail_dens"]),
            int(d["T"]), int(d["m_star"]), int(d["T_star"]), str_to_int(d["tau_star"]), int(d["E_star"]),
            str_to_int(d["Q"]), str_to_int(d["R"]), tuple(str_to_int(x) for x in d["Z"]),
            d["zeta"], int(d["precision_bits"]),
            rat_from_json(d["zeta_lo"]), rat_from_json(d["zeta_hi"]),
            rat_from_json(d["distance_upper"]), rat_from_json(d["drauf_margin"]),
            rat_from_json(d["tail_margin"]), rat_from_json(d["relativprim_margin"]),
            int(d["witness_precision"]), str_to_int(d["gcd"]))


def _homogeneous(d, A, W, m):
    """``sum_j d_j A^j W^(m-j)`` by Horner."""
    acc = mpz(d[m])
    Wp = mpz(1)
    for j in range(m - 1, -1, -1):
        Wp *= W
        acc = acc * A + d[j] * Wp
    return acc


def _poly_value(d, q, m, x):
    """``sum_j d_j q^m x^j`` exactly for a rational x."""
    x = mpq(x)
    return mpq(q ** m * _homogeneous(d, x.numerator, x.denominator, m), x.denominator ** m)


def _image_enclosure(d, q, m, iv):
    if iv.lo >= 0:
        return RationalInterval(_poly_value(d, q, m, iv.lo), _poly_value(d, q, m, iv.hi))
    acc = None
    for c in reversed(d):
        ci = RationalInterval.point(mpq(c))
        acc = ci if acc is None else acc * iv + ci
    return acc * RationalInterval.point(mpq(q ** m))


def _relativprim(d, q, p, m, iv):
    """Exact ``Z_j = q^(m-j) p^j d_j`` and the summed monomial deviations (upper)."""
    qa = iv * q
    Z = tuple(q ** (m - j) * p ** j * d[j] for j in range(m + 1))
    total = mpq(0)
    for j in range(1, m + 1):
        total += (abs(qa ** j - p ** j) * (q ** (m - j) * d[j])).hi
    return Z, total


MAX_CERT_PRECISION = 1 << 25


class _Undecided(Exception):
    pass


def _certificate_at(m, s, q, k, dens, tail_dens, T, m_star, T_star, tau_star, E_star, zeta,
                    precision):
    """Every certificate field recomputed from scratch at one precision."""
    zeta_real = real_from_descriptor(zeta) if isinstance(zeta, dict) else zeta
    iv = zeta_real.enclosure(precision)
    if iv.lo < -T or iv.hi > T:
        raise DomainError(f"zeta enclosure leaves [-T_{m}, T_{m}]")
    q = mpz(q)
    p_lo, _ = nearest_integer(q * iv.lo)
    p_hi, _ = nearest_integer(q * iv.hi)
    B = mpz(dens[m])
    if any(B % b for b in dens):
        raise DomainError("denominators do not all divide b_m")
    d = [B // mpz(b) for b in dens]
    V = _image_enclosure(d, q, m, iv)
    R_lo, _ = nearest_integer(V.lo)
    R_hi, _ = nearest_integer(V.hi)
    if p_lo != p_hi or R_lo != R_hi:
        raise _Undecided
    p, R = p_lo, R_lo
    Q = B * q ** m
    Qm = Q ** m
    dist = max(abs(V.lo - R), abs(V.hi - R))
    drauf_margin = mpq(1, 2) - Qm * dist
    Z, total = _relativprim(d, q, p, m, iv)
    if drauf_margin <= 0 or total >= mpq(1, 2):
        raise _Undecided
    if sum(Z, mpz(0)) != R:
        raise SufficiencyCheckFailed("sum of Z_j differs from the nearest integer R")
    xabs = max(abs(iv.lo), abs(iv.hi))
    tb = tail_bound(tail_dens, m, s, xabs, m_star, T_star, tau_star, E_star)
    tail_margin = mpq(1, 2) - tb.scaled_upper(Qm * Q)
    wit = verify_witness(zeta_real, q, k)
    if not wit.holds or wit.q != q or wit.p != p:
        raise SufficiencyCheckFailed(f"q = {q} is not a witness of exponent {k}")
    return StageCertificate(
        m, s, q, p, int(k), tuple(mpz(x) for x in dens), tuple(mpz(x) for x in tail_dens),
        int(T), int(m_star), int(T_star), mpz(tau_star), int(E_star), Q, R, Z,
        zeta if isinstance(zeta, dict) else zeta_real.descriptor, int(precision),
        iv.lo, iv.hi, dist, drauf_margin, tail_margin, mpq(1, 2) - total,
        int(wit.precision_bits), gcd(R, q))


def verify_derivative_image(f: HauptFunction, s, zeta, m, max_precision=MAX_CERT_PRECISION):
    """Certificate for ``f^(s)`` at stage m, using the witness and constants of stage m+s."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s > f.s_max:
        raise BudgetExceeded(f"derivative order {s} exceeds s_max = {f.s_max}: "
                             "the strengthened coefficient constraints were not applied")
    st = f.stage(m)
    star = f.stage(m + s)
    last = f.stage(f.M)
    dens = f.derivative_denominators(m, s)
    tail_dens = tuple(f.b[m + 1 + s:])
    zeta = as_real(zeta)
    Q_bits = int(dens[m].bit_length()) + m * int(star.q.bit_length())
    precision = (m + 2) * Q_bits + 64
    while True:
        try:
            cert = _certificate_at(m, s, star.q, star.k, dens, tail_dens, st.T, last.m,
                                   last.T, last.tau, last.E, zeta, precision)
        except _Undecided:
            if precision > max_precision:
                raise PrecisionExhausted(f"stage {m} (s = {s}) undecided",
                                         needed=f"> {max_precision} bits") from None
            precision *= 2
            continue
        if cert.tail_margin <= 0:
            raise SufficiencyCheckFailed(f"tail exceeds half of Q^-{m} at stage {m}")
        if cert.gcd != 1:
            raise AssertionError("gcd(R, q) > 1 after a passing sufficiency check")
        return cert


def verify_image(f: HauptFunction, zeta, m, max_precision=MAX_CERT_PRECISION):
    """Certificate that ``||Q f(zeta)|| <= Q^-m`` with ``gcd(R, q) = 1`` at stage m."""
    return verify_derivative_image(f, 0, zeta, m, max_precision)


def recheck_certificate(cert):
    """Recompute a certificate (object or JSON) at its own precision; ``(ok, reason)``."""
    try:
        if isinstance(cert, dict):
            cert = StageCertificate.from_json(cert)
        m, s = cert.m, cert.s
        if len(cert.dens) != m + 1:
            return False, "wrong number of denominators"
        for j in range(m):
            if cert.dens[j + 1] % cert.dens[j]:
                return False, f"b_{j} does not divide b_{j + 1}"
        if not mpz(2) ** cert.k > mpz(2) ** (m * m + m - 1) * D_of(m, cert.T, cert.dens[m]):
            return False, f"k = {cert.k} fails 2^k > 2^(m^2+m-1) D_{m}"
        fresh = _certificate_at(m, s, cert.q, cert.k, cert.dens, cert.tail_dens, cert.T,
                                cert.m_star, cert.T_star, cert.tau_star, cert.E_star, cert.zeta,
                                cert.precision_bits)
    except _Undecided:
        return False, "undecided at the stored precision"
    except Exception as exc:  # any failure to recompute rejects the certificate
        return False, f"{type(exc).__name__}: {exc}"
    if fresh != cert:
        names = [n for n in cert.__dataclass_fields__ if getattr(fresh, n) != getattr(cert, n)]
        return False, f"recomputed fields differ: {', '.join(names)}"
    if not cert.holds:
        return False, "margins not positive or gcd(R, q) > 1"
    return True, "ok"


def derivative_constant_audit(f: HauptFunction):
    """Check ``B_m^(t+1) = B_{m+1}^(t) / (m+1)`` wherever both sides are built."""
    checked = 0
    for t in range(f.s_max):
        m = 0
        while m + 2 + t < len(f.b):
            lhs = f.derivative_denominators(m, t + 1)[m]
            rhs = f.derivative_denominators(m + 1, t)[m + 1]
            if rhs % (m + 1) or lhs != rhs // (m + 1):
                raise AssertionError(f"B_{m}^({t + 1}) != B_{m + 1}^({t})/{m + 1}")
            checked += 1
            m += 1
    return checked


# ---------------------------------------------------------------------------
# images of nonzero rationals

@dataclass(frozen=True)
class RationalImageWitness:
    """``|Q f(x) - A| = distance`` with ``Q = B_m l2^m`` and ``distance`` enclosed."""

    m: int
    Q: mpz
    A: mpz
    distance: RationalInterval
    exponent: RationalInterval  # of -log distance / log Q
    nonconstant: bool  # c_{m+1} x^{m+1} != 0


def verify_rational_image(f: HauptFunction, x, m_range, precision=64):
    """Witnesses ``(B_m l2^m, A_m)`` for ``f(l1/l2)`` with exponent enclosures."""
    x = mpq(x)
    if x == 0:
        raise DomainError("f(0) = c_0 = 1 is rational; x must be nonzero")
    l1, l2 = x.numerator, x.denominator
    out = []
    for m in m_range:
        st = f.stage(m)
        if abs(x) > st.T:
            raise DomainError(f"|x| exceeds T_{m} = {st.T}")
        dens = f.P(m)
        B = dens[m]
        A = _homogeneous([B // b for b in dens], l1, l2, m)
        Q = B * l2 ** m
        tb = _tail_for(f, m, 0, abs(x))
        upper = tb.scaled_upper(Q)
        signed = sum((x ** j / f.b[j] for j in range(m + 1, len(f.b))), mpq(0))
        if x > 0:
            lower = Q * signed
        else:
            lower = max(Q * abs(signed) - (upper - Q * tb.built), mpq(0))
        if lower <= 0:
            raise PrecisionExhausted(f"no positive lower bound on the distance at m = {m}",
                                     needed="more built coefficients")
        if upper >= mpq(1, 2):
            raise SufficiencyCheckFailed(f"distance bound {upper} not below 1/2 at m = {m}")
        lo_e = log_ratio_enclosure(1 / upper, Q, precision).lo
        hi_e = log_ratio_enclosure(1 / lower, Q, precision).hi
        out.append(RationalImageWitness(m, Q, A, RationalInterval(lower, upper),
                                        RationalInterval(lo_e, hi_e), x != 0))
    return out
