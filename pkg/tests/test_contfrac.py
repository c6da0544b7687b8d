from gmpy2 import mpq
import pytest
from hypothesis import given, settings, strategies as st

from liouville.contfrac import (
    CFExpansion,
    cf_of_rational,
    convergents,
    delete_partial_quotients,
    format_expansion,
    lagrange_check,
    legendre_locate,
    liouville_ratio_profile,
    parse_expansion,
    reconstruct_value,
)
from liouville.errors import InvalidDeletion
from liouville.reals import cf_prefix

quotient_lists = st.lists(st.integers(1, 10**6), min_size=1, max_size=30).flatmap(
    lambda tail: st.integers(-10, 10).map(lambda r0: [r0] + tail))


@pytest.mark.parametrize("x, head", [
    (mpq(355, 113), (3, 7, 16)),
    (mpq(110001, 10**6), (0, 9, 11, 99, 1, 10, 9)),
    (mpq(5), (5,)),
])
def test_cf_of_rational_oracles(x, head):
    cf = cf_of_rational(x)
    assert cf.partial_quotients == head
    assert cf.complete


def test_convergent_oracles():
    golden = CFExpansion([1, 1, 1, 1, 1])
    assert [convergents(golden, n) for n in range(5)] == [(1, 1), (2, 1), (3, 2), (5, 3), (8, 5)]
    assert CFExpansion([0, 2, 2, 25]).denominators == (1, 2, 5, 127)
    assert convergents(CFExpansion([7]), 0) == (7, 1)


def test_legendre_locate_oracles(L, golden):
    assert legendre_locate(L, 11, 100) == 2
    assert legendre_locate(golden, 2, 1) == 1
    assert legendre_locate(mpq(1, 2), 1, 3) is None


def test_lagrange_golden_index_two(golden):
    c = lagrange_check(cf_prefix(golden, 8), golden, 2)
    assert c.holds
    assert (c.lower, c.upper) == (mpq(1, 5), mpq(1, 3))
    assert c.distance.lo > mpq(236, 1000) and c.distance.hi < mpq(237, 1000)


def test_ratio_profile_golden_tends_to_one(golden):
    prof = liouville_ratio_profile(cf_prefix(golden, 14))
    assert prof[0] is None  # t_1 = 1
    assert all(iv.hi <= mpq(3, 2) for iv in prof[4:])
    his = [iv.hi for iv in prof[1:]]
    assert his == sorted(his, reverse=True)


def test_delete_partial_quotients():
    assert delete_partial_quotients(CFExpansion([0, 2, 3, 4, 5]), {2}).partial_quotients == (0, 2, 3, 5)
    cf = CFExpansion([0, 2, 3, 4, 5])
    assert delete_partial_quotients(cf, set()) == cf
    assert delete_partial_quotients(CFExpansion([1, 1, 1, 1]), {0, 1, 2}).partial_quotients == (1,)
    with pytest.raises(InvalidDeletion):
        delete_partial_quotients(CFExpansion([1, 2, 3]), {5})


def test_canonical_form_merges_trailing_one():
    cf = CFExpansion([1, 2, 1], complete=True)
    assert cf.partial_quotients == (1, 3)
    assert reconstruct_value(cf) == mpq(4, 3)
    with pytest.raises(ValueError):
        CFExpansion([1, 0, 2])


def test_file_format_round_trip():
    cf = CFExpansion([0, 9, 11, 99])
    assert parse_expansion(format_expansion(cf, "prefix of L"), complete=False) == cf


@settings(max_examples=300)
@given(quotient_lists)
def test_recurrence_and_determinant(qs):
    cf = CFExpansion(qs)
    s, t = cf.numerators, cf.denominators
    for n in range(len(qs) - 1):
        assert abs(s[n] * t[n + 1] - s[n + 1] * t[n]) == 1
        if n >= 1:
            assert t[n + 1] == qs[n + 1] * t[n] + t[n - 1]


@settings(max_examples=300)
@given(st.integers(-10**9, 10**9), st.integers(1, 10**9))
def test_rational_round_trip(a, b):
    x = mpq(a, b)
    cf = cf_of_rational(x)
    assert reconstruct_value(cf) == x
    assert cf_of_rational(reconstruct_value(cf)) == cf
