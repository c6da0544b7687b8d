from gmpy2 import mpq, mpz
import pytest

from liouville.errors import DomainError, PoleError, SufficiencyCheckFailed
from liouville.maillet import (
    RationalFunction,
    TruncationImageWitness,
    UnitFractionPolynomial,
    denominator_exponent_audit,
    grob_bound,
    lemma_bound,
    maillet_image_witnesses,
    relativprim_check,
    transform_witness,
)

from fuzzing import fuzz

SQUARE = RationalFunction([0, 0, 1])
AFFINE = RationalFunction([1, 3], [2])
CUBIC = RationalFunction([0, 1, 0, 1])


def test_transform_witness_oracles():
    assert transform_witness(SQUARE, 11, 100) == (121, 10000)
    assert transform_witness(AFFINE, 11, 100) == (133, 200)
    with pytest.raises(PoleError):
        transform_witness(RationalFunction([1], [0, 1]), 0, 1)


def test_content_is_factored_out():
    f = RationalFunction([2, 6], [4])
    assert (f.P, f.Q) == ([1, 3], [2])


def test_denominator_exponent_audit():
    a = denominator_exponent_audit(SQUARE, [(1, 9), (11, 100)], 2)
    assert a.passed and a.max_exponent == 2
    b = denominator_exponent_audit(AFFINE, [(11, 100)], 2)
    assert b.passed and abs(b.max_exponent - mpq(115, 100)) < mpq(1, 100)
    c = denominator_exponent_audit(RationalFunction([0, 1]), [(1, 9)], 1)
    assert c.max_exponent == 1


def test_lemma_bound_oracle():
    assert lemma_bound([0, mpq(1, 2)], 1, 100, 3) == mpq(2, 10**6)


def test_grob_bound_oracles(L):
    g = grob_bound(UnitFractionPolynomial((1, 2)), L, 9, 2, verify=True)
    assert g.verified
    assert g.bound == mpq(2, 81)
    assert g.norm.lo > mpq(9990, 10**6) and g.norm.hi < mpq(9991, 10**6)  # ||9L|| = 0.00999099...
    const = grob_bound([mpq(1, 3)], L, 9, 2, verify=True)
    assert const.bound == 0 and const.verified


def test_grob_bound_rejects_failed_hypothesis(L):
    with pytest.raises(DomainError):
        grob_bound([0, 1], L, 100, 2)


def test_relativprim_oracles(L):
    P = UnitFractionPolynomial((1, 2))
    big = relativprim_check(P, L, 10**6)
    assert (big.p, big.R, big.gcd) == (110001, 2110001, 1)
    small = relativprim_check(P, L, 9)
    assert (small.p, small.R, small.gcd) == (1, 19, 1)


def test_relativprim_rejects_non_coprime(L):
    with pytest.raises(DomainError):
        relativprim_check(UnitFractionPolynomial((1, 2)), L, 20)  # 20L = 2.2..., p = 2


def test_unit_fraction_chain_must_divide():
    with pytest.raises(ValueError):
        UnitFractionPolynomial((2, 3))


def test_image_witness_square_at_level_four(L):
    (w,) = maillet_image_witnesses(SQUARE, L, [4])
    assert w.exponent.lo >= mpq(4, 2) - 1


def test_translation_keeps_exponents(L):
    shifted = maillet_image_witnesses(RationalFunction([3, 1]), L, [2, 3])
    for w in shifted:
        assert w.denominator_exponent.contains(1) and w.denominator_exponent.width < mpq(1, 2**40)
        assert w.exponent.overlaps(w.source_exponent)


@pytest.mark.parametrize("f", [SQUARE, AFFINE, CUBIC])
def test_image_exponents_grow(L, f):
    ws = maillet_image_witnesses(f, L, range(2, 11))
    assert all(isinstance(w, TruncationImageWitness) for w in ws)
    for a, b in zip(ws, ws[1:]):
        assert b.exponent.lo >= a.exponent.hi
    for w in ws:
        assert w.exponent.lo > mpq(w.N) / w.denominator_exponent.hi - 1


def test_truncation_and_search_agree(L):
    (t,) = maillet_image_witnesses(SQUARE, L, [2], method="truncation")
    (s,) = maillet_image_witnesses(SQUARE, L, [2], method="search")
    assert s.source.q == 9 and t.n == 3
    assert s.exponent is not None and s.exponent.lo < t.exponent.lo


def test_rational_map_uses_search(L):
    (w,) = maillet_image_witnesses(RationalFunction([0, 0, 1], [1, 1]), L, [2])
    assert w.source.q == 9
    assert w.exponent_lower is not None


def test_fuzzed_instances_have_no_violations():
    stats = fuzz(300, seed=7)
    assert stats["grob_violations"] == 0
    assert stats["relativprim_violations"] == 0
    assert stats["grob_verified"] == 300
    assert stats["relativprim_ok"] > 50
