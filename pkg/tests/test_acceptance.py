"""Acceptance criteria 1-10, each with its tolerance and wall-clock budget."""

from contextlib import contextmanager
import json
import math
import random
import time

from gmpy2 import gcd, mpq, mpz
import pytest

from conftest import ACCEPTANCE
from corruption import corruptions
from fuzzing import fuzz
from liouville import certificates as C
from liouville.classes import (
    membership_probe,
    phi_from_lambda,
    phi_table_from_lambda,
    strong_profile,
    witness_search,
)
from liouville.contfrac import CFExpansion, cf_of_rational, lagrange_check, legendre_locate, reconstruct_value
from liouville.exact import approximation_exponent, nearest_integer
from liouville.haupt import (
    audit,
    build,
    derivative_constant_audit,
    verify_derivative_image,
    verify_image,
    verify_rational_image,
    zeta_from_descriptor,
)
from liouville.maillet import RationalFunction, TruncationImageWitness, maillet_image_witnesses
from liouville.power import build_rati_zeta, exponent_scan, lemma_inf_scan
from liouville.reals import cf_prefix, exact_real, named_real, power_real

IDENTITY = list(range(1, 65))


@contextmanager
def criterion(k, budget, title, setup=0.0):
    """Time the block (plus shared setup), assert the budget and record a PASS/FAIL line."""
    start = time.perf_counter()
    line = f"criterion {k}: FAIL ({title})"
    try:
        yield
        elapsed = time.perf_counter() - start + setup
        ok = elapsed < budget
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({title}; {elapsed:.2f} s of {budget} s)"
        assert ok, f"criterion {k} took {elapsed:.2f} s, budget {budget} s"
    finally:
        ACCEPTANCE[k] = line
        print(line)


@pytest.fixture(scope="module")
def rati():
    start = time.perf_counter()
    z = build_rati_zeta(stages=6)
    return z, time.perf_counter() - start


def test_criterion_01_legendre_oracle():
    rng = random.Random(1)
    with criterion(1, 10, "Legendre hits are convergents, 100 rationals, q <= 500"):
        exceptions = []
        hits = 0
        for _ in range(100):
            alpha = mpq(rng.randint(-3000, 3000), rng.randint(1, 1000))
            cf = cf_of_rational(alpha)
            conv = set(zip(cf.numerators, cf.denominators))
            x = exact_real(alpha)
            for q in range(1, 501):
                p, d = nearest_integer(alpha * q)
                if gcd(p, q) != 1 or not d < mpq(1, 2 * q):
                    continue
                hits += 1
                if (p, q) not in conv or legendre_locate(x, p, q) is None:
                    exceptions.append((alpha, p, q))
        assert hits > 100 and exceptions == []


def _random_cf(rng):
    n = rng.randint(4, 30)
    rs = [rng.randint(0, 10**6)] + [rng.randint(1, 10**6) for _ in range(n - 1)]
    rs[-1] = max(rs[-1], 2)
    return CFExpansion(rs, complete=True)


def _chain_holds(cf, value, last):
    return all(lagrange_check(cf, value, n).holds for n in range(last + 1))


def test_criterion_02_lagrange_chain(rati):
    rng = random.Random(2)
    z, _ = rati
    with criterion(2, 30, "Lagrange chain, 1000 random CFs and 4 fixtures"):
        failures = 0
        for _ in range(1000):
            cf = _random_cf(rng)
            # a finite expansion meets the lower bound with equality at n = len - 3
            if not _chain_holds(cf, exact_real(reconstruct_value(cf)), len(cf) - 4):
                failures += 1
        for name, depth in (("L", 40), ("L2", 40), ("golden", 40)):
            x = named_real(name)
            cf = cf_prefix(x, depth)
            failures += not _chain_holds(cf, x, len(cf) - 3)
        failures += not _chain_holds(z.cf, z.real(), len(z.cf) - 3)
        assert failures == 0


def test_criterion_03_L_witnesses():
    with criterion(3, 5, "exponents of 10^(n!) L in (n - 1e-3, n); search finds q = 9"):
        for n in (2, 3, 4):
            q = mpz(10) ** math.factorial(n)
            # ||q L|| = sum_{k > n} 10^(n! - k!), bracketed by two and three terms
            head = sum(mpq(1, mpz(10) ** (math.factorial(k) - math.factorial(n))) for k in (n + 1, n + 2))
            tail = 2 * mpq(1, mpz(10) ** (math.factorial(n + 3) - math.factorial(n)))
            lo_e = approximation_exponent(q, head + tail)
            hi_e = approximation_exponent(q, head)
            assert q ** n > 1 / head  # exponent strictly below n
            assert lo_e.lo > n - mpq(1, 1000) and hi_e.hi <= n
        assert witness_search(named_real("L"), 2, 10**4).witness.q == 9


def test_criterion_04_hilfspro():
    with criterion(4, 10, "D_1 = 2, D_2 = 27 / 9, three strong fixtures in L_phi"):
        assert phi_from_lambda(IDENTITY, 1).D == 2
        assert phi_from_lambda(IDENTITY, 2).D == 27
        assert phi_from_lambda(IDENTITY, 2, "semistrong").D == 9
        phi = phi_table_from_lambda(IDENTITY)
        for seed in ((0, 2), (0, 3), (1, 2, 2)):
            zeta = zeta_from_descriptor({"kind": "cf", "quotients": [str(r) for r in seed], "tail": "t_n^n"})
            prof = strong_profile(zeta, 6, IDENTITY)
            assert prof.strong and all(w.lo >= i for i, w in enumerate(prof.omegas[1:], start=2))
            assert membership_probe(zeta, phi, range(1, 4), "Lphi").verdict


def test_criterion_05_haupt_co_construct():
    with criterion(5, 120, "co-construct M = 4, s_max = 1, all stage certificates"):
        f, zeta = build("co-construct", M=4, s_max=1, budget_bits=C.DEFAULT_MAX_BITS)
        assert f.M == 4
        for m in range(1, f.M):
            assert f.b[m + 1] % (math.factorial(m) * f.b[m]) == 0
        assert audit(f) and derivative_constant_audit(f) > 0
        for s in (0, 1):
            for m in range(1, f.M + 1 - s):
                c = verify_derivative_image(f, s, zeta, m)
                assert c.drauf_margin > 0 and c.tail_margin > 0 and c.gcd == 1, (m, s)
                assert c.relativprim_margin > 0
        ws = verify_rational_image(f, mpq(1, 2), [1, 2, 3])
        assert all(a.exponent.hi < b.exponent.lo for a, b in zip(ws, ws[1:]))


def test_criterion_06_haupt_analytic():
    with criterion(6, 30, "analytic mode on L, stage 1 verifies, stage 2 truncated"):
        L = named_real("L")
        f, zeta = build("analytic", M=3, zeta=L, phi="10^(x+1)!")
        c = verify_image(f, zeta, 1)
        assert c.holds and c.gcd == 1
        assert f.M == 1 and "stage 2" in f.truncation


def test_criterion_07_rati(rati):
    z, build_time = rati
    with criterion(7, 120, "prime-denominator CF, 6 stages, lemma_inf empty", setup=build_time):
        assert len(z.cf) - z.seed_length == 6
        assert [int(t) for t in z.denominators[1:4]] == [2, 5, 127]
        assert z.conforming and z.validate() == (True, "ok")
        assert all(a.hi < b.lo for a, b in zip(z.nu, z.nu[1:]))
        zeta, H = z.real(), z.denominators[-1]
        for a, b in ((1, 2), (1, 3), (2, 3), (3, 2)):
            assert lemma_inf_scan(zeta, a, b, mpq(max(a, b)) + mpq(1, 2), H).hits == ()


def test_criterion_08_exponent_scans(rati):
    z, _ = rati
    with criterion(8, 60, "root of the prime-CF number stays <= 4.5, the number itself >= 6"):
        zeta = z.real()
        root = exponent_scan(power_real(zeta, 1, 2), 10**6)
        assert root.max_hi <= mpq(9, 2)
        full = exponent_scan(zeta, z.denominators[5])
        assert full.max_lo >= 6


MAPS = ((RationalFunction([0, 0, 1]), 2), (RationalFunction([1, 3], [2]), 1),
        (RationalFunction([0, 1, 0, 1]), 3))


def test_criterion_09_maillet():
    with criterion(9, 60, "image exponents grow past N/deg - 1; 1000 fuzzed instances"):
        L = named_real("L")
        for f, deg in MAPS:
            ws = maillet_image_witnesses(f, L, range(2, 11))
            assert [w.N for w in ws] == list(range(2, 11))
            assert all(isinstance(w, TruncationImageWitness) for w in ws)
            assert all(b.exponent.lo >= a.exponent.hi for a, b in zip(ws, ws[1:]))
            assert all(w.exponent.lo > mpq(w.N, deg) - 1 for w in ws)
        stats = fuzz(1000)
        assert stats["instances"] == 1000
        assert stats["grob_violations"] == 0 and stats["relativprim_violations"] == 0
        assert stats["grob_verified"] == 1000
        print(f"fuzz: {stats}")


def _emit_all():
    L = {"kind": "named", "name": "L"}
    golden = {"kind": "named", "name": "golden"}
    envs = [C.envelope("witness", C.witness_payload(L, 9, 2)),
            C.envelope("witness", C.witness_payload(L, 10, 2))]
    f, z = build("co-construct", M=2, s_max=0)
    envs += [C.envelope("stage", C.stage_payload(verify_image(f, z, m))) for m in (1, 2)]
    g, w = build("co-construct", M=2, s_max=1)
    envs.append(C.envelope("stage", C.stage_payload(verify_derivative_image(g, 1, w, 1))))
    envs.append(C.envelope("lagrange", C.lagrange_payload(L, ["0", "9", "11", "99", "1"], 2)))
    envs.append(C.envelope("legendre", C.legendre_payload(L, 11, 100)))
    envs.append(C.envelope("legendre", C.legendre_payload(golden, 5, 3)))
    envs.append(C.envelope("rati-stage", C.rati_payload(build_rati_zeta(3))))
    envs.append(C.envelope("scan", C.scan_payload("exponent", golden, H="100")))
    envs.append(C.envelope("scan", C.scan_payload("lemma-inf", L, a=1, b=2,
                                                  eta={"num": "5", "den": "2"}, H="1000")))
    envs.append(C.envelope("scan", C.scan_payload(
        "minkkoro", {"kind": "rational", "value": {"num": "1", "den": "2"}}, Q="3")))
    envs.append(C.envelope("probe", C.probe_payload(L, "10^(x+1)!", [1, 2, 3], "Lphi")))
    envs.append(C.envelope("probe", C.probe_payload(L, "x", [2, 3], "Lphi")))
    return envs


def test_criterion_10_certificates():
    with criterion(10, 10, "all certificates re-verify; every single-field corruption rejected"):
        envs = [json.loads(json.dumps(e)) for e in _emit_all()]
        assert {e["kind"] for e in envs} == set(C.KINDS)
        assert all(C.verify_envelope(e)[0] != "invalid" for e in envs)
        total = rejected = 0
        for env in envs:
            for _, bad in corruptions(env, reseal=False):
                total += 1
                rejected += C.verify_envelope(bad)[0] == "invalid"
        # payload edits carrying a fresh seal: only recomputation can catch them
        resealed = semantic = 0
        inert = []
        for env in envs:
            for path, bad in corruptions(env, reseal=True):
                if path[0] != "payload":
                    continue
                resealed += 1
                if C.verify_envelope(bad)[0] == "invalid":
                    semantic += 1
                else:
                    inert.append((env["kind"], path))
        print(f"corruptions rejected: {rejected}/{total}; "
              f"semantic layer alone: {semantic}/{resealed}; still true after the edit: {inert}")
        assert rejected == total
