import json
import random

from gmpy2 import mpq, mpz
import pytest
from hypothesis import given, settings, strategies as st

from liouville.errors import DomainError
from liouville.power import (
    PrimeCFLiouville,
    build_rati_zeta,
    bth_power_generator,
    check_attestation,
    exponent_scan,
    first_prime_in_progression,
    lemma_inf_scan,
    lift_bound,
    lift_witness_power,
    minkkoro_check,
    nu_enclosure,
    primality_attestation,
)
from liouville.reals import exact_real, named_real


@pytest.fixture(scope="module")
def short_rati():
    return build_rati_zeta(stages=3)


def test_bth_power_generator(L):
    sq = bth_power_generator(L, 2)
    x = L.enclosure(80)
    assert (sq.enclosure(80) * 81 - 1).overlaps((x * 9 - 1) * (x * 9 + 1))
    assert bth_power_generator(L, 1).enclosure(60).overlaps(L.enclosure(60))
    assert bth_power_generator(exact_real(2), 3).exact_value == 8


def test_rati_prefix(short_rati):
    z = short_rati
    assert z.cf.partial_quotients[:4] == (0, 2, 2, 25)
    assert z.denominators[:5] == (1, 2, 5, 127, 260147059)
    assert z.cf.partial_quotients[4] == first_prime_in_progression(127, 5, 127**3)[0]
    assert z.conforming
    assert z.validate() == (True, "ok")


def test_rati_nu_increases(short_rati):
    nus = short_rati.nu
    assert all(a.hi < b.lo for a, b in zip(nus, nus[1:]))


def test_rati_round_trip_and_tamper(short_rati):
    d = json.loads(json.dumps(short_rati.to_json()))
    assert PrimeCFLiouville.from_json(d).validate()[0]
    bad = json.loads(json.dumps(d))
    bad["stages"][-1]["t"] = str(int(bad["stages"][-1]["t"]) + 2)
    with pytest.raises(ValueError):
        PrimeCFLiouville.from_json(bad)
    bad = json.loads(json.dumps(d))
    bad["stages"][1]["primality"]["method"] = "trust-me"
    ok, reason = PrimeCFLiouville.from_json(bad).validate()
    assert not ok and "t_2" in reason


def test_growth_override_is_labelled():
    z = build_rati_zeta(stages=2, growth=lambda g: 1)
    assert not z.conforming


def test_primality_attestations():
    small = primality_attestation(mpz(127))
    assert small == {"method": "bpsw-deterministic-below-2^64", "rounds": 0}
    big = primality_attestation(mpz(2) ** 127 - 1)
    assert big["rounds"] >= 64
    assert check_attestation(mpz(2) ** 127 - 1, big)
    assert primality_attestation(mpz(91)) is None
    assert not check_attestation(mpz(91), small)


def test_nu_enclosure_brackets():
    iv = nu_enclosure(mpz(5), mpz(127))
    assert iv.lo < 3.01 < iv.hi + mpq(1, 100)


def test_lift_oracles(L):
    c = lift_witness_power(1, 9, 2, L, 2)
    assert c.holds and c.bound == mpq(4, 9)
    assert abs(c.left.mid - mpq(199, 10**4)) < mpq(1, 10**4)
    one = lift_witness_power(1, 9, 2, L, 1)
    assert one.bound == mpq(1, 81) and one.holds
    assert lift_bound(3, 1, 100, 2) == 12


def test_lemma_inf_oracles(L):
    hits = lemma_inf_scan(bth_power_generator(L, 2), 1, 2, 1, 10).hits
    assert [(h.p, h.q) for h in hits] == [(1, 9)]


def test_lemma_inf_empty_on_rati(short_rati):
    zeta = short_rati.real()
    H = short_rati.denominators[3]
    for a, b in [(1, 2), (1, 3), (2, 3), (3, 2)]:
        assert lemma_inf_scan(zeta, a, b, mpq(max(a, b)) + mpq(1, 2), H).hits == ()


def test_minkkoro_oracles(golden):
    # the best candidate 13/8 misses: |8 phi - 13| = 0.0557 > 1/20
    rep = minkkoro_check(golden, 10)
    assert rep.unique and rep.primitive == ()
    half = minkkoro_check(exact_real(mpq(1, 2)), 3)
    assert half.primitive == ((2, 1),) and half.unique and half.convergent_index == 1
    with pytest.raises(DomainError):
        minkkoro_check(golden, 1)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["L", "L2", "golden", "sqrt2"]), st.integers(2, 120))
def test_minkkoro_never_two_primitive_solutions(name, Q):
    rep = minkkoro_check(named_real(name), Q)
    assert rep.unique
    if rep.primitive:
        assert rep.convergent_index is not None


def test_exponent_scans(golden, short_rati):
    g = exponent_scan(golden, 10**6)
    assert g.max_hi < 4
    z = exponent_scan(short_rati.real(), short_rati.denominators[4])
    assert z.max_lo >= 5
