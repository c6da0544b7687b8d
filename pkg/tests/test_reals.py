import itertools

from gmpy2 import mpq, mpz
import pytest
from hypothesis import given, settings, strategies as st

from liouville.contfrac import cf_of_rational
from liouville.errors import DomainError, PoleError, PrecisionExhausted
from liouville.reals import (
    cf_prefix,
    cf_real,
    convergents_until,
    exact_real,
    make_series_liouville,
    named_real,
    power_real,
    rational_map,
    real_from_descriptor,
)


def test_L_decimal_expansion(L):
    r, e = L.approx(100)
    digits = (r * 10**25).__floor__()
    assert str(int(digits)).zfill(25) == "1100010000000000000000010"[:25]
    assert e <= mpq(1, 2**100)


def test_L2_partial_sum():
    r, e = named_real("L2").approx(30)
    assert r == mpq(1, 2) + mpq(1, 4) + mpq(1, 64) + mpq(1, 2**24)
    assert e <= mpq(1, 2**30)


def test_single_term_series_is_exact():
    x = make_series_liouville(10, [1], [1])
    assert x.exact_value == mpq(1, 10)
    assert x.approx(50) == (mpq(1, 10), 0)


def test_cf_real_oracles(L):
    assert cf_real([3, 7, 16]).exact_value == mpq(355, 113)
    phi = cf_real(itertools.repeat(1))
    assert phi.enclosure(40).contains(mpq(1346269, 832040))
    from_quotients = cf_real(cf_prefix(L, 12))
    assert from_quotients.enclosure(60).overlaps(L.enclosure(60))


def test_cf_real_exhaustion():
    with pytest.raises(PrecisionExhausted):
        cf_real(iter([1, 2, 3])).approx(200)


def test_rational_map_oracles(L):
    sq = rational_map(L, [0, 0, 1])
    r, _ = sq.approx(60)
    assert str(int((r * 10**7).__floor__())) == "121002"
    assert rational_map(L, [0, 1]).enclosure(60).overlaps(L.enclosure(60))
    with pytest.raises(PoleError):
        rational_map(exact_real(0), [1], [0, 1]).approx(20)


def test_power_real_oracles(L):
    assert power_real(exact_real(4), 1, 2).exact_value == 2
    sq = rational_map(L, [0, 0, 1])
    assert power_real(sq, 1, 2).enclosure(80).overlaps(L.enclosure(80))
    cube = power_real(L, 3, 1).enclosure(60)
    assert cube.overlaps((L.enclosure(80) ** 3))
    with pytest.raises(DomainError):
        power_real(exact_real(-1), 1, 2).approx(10)


def test_cf_prefix_oracles(L, golden):
    assert cf_prefix(L, 3).partial_quotients == (0, 9, 11)
    assert cf_prefix(golden, 10).partial_quotients == (1,) * 10
    assert cf_prefix(exact_real(mpq(355, 113)), 10).partial_quotients == (3, 7, 16)


@pytest.mark.parametrize("name", ["L", "L2", "L3", "golden", "sqrt2"])
def test_oracle_consistency(name):
    x = named_real(name)
    prev = None
    for k in (8, 16, 40, 100, 200):
        r, e = x.approx(k)
        assert e <= mpq(1, 2**k)
        if prev is not None:
            assert abs(r - prev[0]) <= e + prev[1]
        prev = (r, e)


@pytest.mark.parametrize("name", ["L", "L2", "golden"])
def test_cf_prefix_sound_against_finer_truncation(name):
    x = named_real(name)
    cf = cf_prefix(x, 6)
    r, _ = x.approx(4 * 256)
    fine = cf_of_rational(r).partial_quotients
    assert fine[:len(cf)] == cf.partial_quotients


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(2, 4))
def test_power_round_trip(a, b, k):
    x = exact_real(mpq(a, b))
    back = power_real(power_real(x, 1, k), k, 1)
    assert back.enclosure(60).contains(mpq(a, b))


def test_descriptor_round_trip(L):
    y = real_from_descriptor(L.to_json())
    assert y.enclosure(200).overlaps(L.enclosure(200))
    z = real_from_descriptor({"kind": "series", "M": "10", "exponents": "factorial", "digits": "ones"})
    assert z.enclosure(100) == L.enclosure(100)


def test_convergents_until_does_not_overshoot_exploding_quotients():
    from liouville.haupt import zeta_from_descriptor

    # r_{n+1} = t_n^n: r_9 already has about 10^5 bits, so doubling the term count would not finish
    zeta = zeta_from_descriptor({"kind": "cf", "quotients": ["0", "2"], "tail": "t_n^n"})
    t = cf_prefix(zeta, 6).denominators
    ns = [n for n, _, _ in convergents_until(zeta, t[5] ** 2)]
    assert ns == [0, 1, 2, 3, 4, 5, 6]
