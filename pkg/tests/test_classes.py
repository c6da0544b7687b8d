from gmpy2 import mpq, mpz
import pytest

from liouville.classes import (
    membership_probe,
    minimum_function,
    named_phi,
    phi_from_lambda,
    phi_table_from_lambda,
    strong_profile,
    ultra_probe,
    verify_witness,
    witness_search,
    recheck_witness,
)
from liouville.errors import DomainError, RationalHit
from liouville.haupt import zeta_from_descriptor
from liouville.reals import cf_prefix, cf_real, exact_real, named_real

IDENTITY = list(range(1, 40))


def power_tail(*seed):
    return zeta_from_descriptor({"kind": "cf", "quotients": [str(r) for r in seed], "tail": "t_n^n"})


def test_verify_witness_oracles(L):
    assert verify_witness(L, 10**6, 2).holds
    assert not verify_witness(L, 100, 2).holds  # marginal: 10^-4 + 10^-22 > 100^-2
    with pytest.raises(DomainError):
        verify_witness(L, 1, 2)


def test_witness_certificate_rechecks(L):
    w = verify_witness(L, 9, 2)
    assert w.holds and w.p == 1
    assert 0 < w.norm < mpq(1, 81) and w.slack > 0
    assert recheck_witness(L, w.q, w.N, w.p, w.norm, w.slack, w.precision_bits)


def test_witness_search_oracles(L):
    assert witness_search(L, 2, 10**4).witness.q == 9
    assert witness_search(L, 2, 5).witness is None
    with pytest.raises(RationalHit):
        witness_search(exact_real(mpq(1, 3)), 2, 100)


def test_minimum_function_of_L(L):
    mf = minimum_function(L, 2)
    assert mf.q(2) == 9
    # at N = 1 the exhaustive scan finds 8: ||8L|| = 0.1199... <= 1/8, not a convergent denominator
    assert mf.q(1) == 8
    assert mf.q(2) in cf_prefix(L, 4).denominators


def test_membership_probe_oracles(L):
    assert membership_probe(L, named_phi("10^(x+1)!"), range(1, 4), "Lphi").verdict
    assert not membership_probe(L, named_phi("x"), range(2, 4), "Lphi").verdict
    for name in ("L2", "L3"):
        rep = membership_probe(named_real(name), named_phi("2^(x!)!"), range(2, 4), "Lphi*")
        assert rep.verdict
        assert rep.to_json()["scope"] == "probed range only"


def test_phi_from_lambda_oracles():
    assert phi_from_lambda(IDENTITY, 1).D == 2
    strong = phi_from_lambda(IDENTITY, 2)
    assert (strong.iota, strong.chain[1:], strong.D) == (2, (3, 27), 27)
    assert phi_from_lambda(IDENTITY, 2, "semistrong").D == 9
    with pytest.raises(ValueError):
        phi_from_lambda([1], 3)


@pytest.mark.parametrize("seed", [(0, 2), (0, 3), (1, 2, 2)])
def test_power_tail_fixture_is_strong(seed):
    prof = strong_profile(power_tail(*seed), 6, IDENTITY)
    assert prof.strong and prof.semistrong
    for i, w in enumerate(prof.omegas[1:], start=2):
        assert w.lo > i  # omega(n) is about n + 1


def test_golden_is_not_strong(golden):
    prof = strong_profile(golden, 12, IDENTITY)
    assert not prof.strong
    assert all(w.hi < 3 for w in prof.omegas)


def test_ultra_probe_oracles(L, golden):
    assert ultra_probe(L, 1, 1000).q is None
    hit = ultra_probe(golden, 0, 100)
    assert (hit.p, hit.q) == (3, 2)
    # zeta = [0; 2, r] with r so large that |zeta - 1/2| < exp(-exp(2))
    zeta = cf_real(iter([0, 2, 10**5] + [1] * 400))
    assert ultra_probe(zeta, 2, 10).q == 2


def test_hilfspro_fixtures_pass_membership():
    phi = phi_table_from_lambda(IDENTITY)
    for seed in [(0, 2), (0, 3), (1, 2, 2)]:
        assert membership_probe(power_tail(*seed), phi, range(1, 4), "Lphi").verdict
