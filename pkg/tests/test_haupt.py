import json

from gmpy2 import mpq, mpz
import pytest

from liouville.errors import BudgetExceeded, DomainError
from liouville.exact import RationalInterval
from liouville.haupt import (
    HauptFunction,
    StageCertificate,
    audit,
    build,
    choose_b_next,
    choose_k,
    derivative_constant_audit,
    eval_with_tail,
    hbed_threshold,
    recheck_certificate,
    verify_derivative_image,
    verify_image,
    verify_rational_image,
    zeta_from_descriptor,
)


@pytest.fixture(scope="module")
def plain():
    return build("co-construct", M=3, s_max=0)


@pytest.fixture(scope="module")
def deriv():
    return build("co-construct", M=3, s_max=1)


def test_choose_k_oracles():
    assert choose_k(1, 2, 1) == (5, 8)
    assert choose_k(1, 1, 1) == (3, 2)
    # 2^k > 2^(m^2+m-1) D at the boundary where D is a power of two
    k, D = choose_k(1, 2, 1)
    assert 2**k > 2 ** 1 * D and 2 ** (k - 1) <= 2 ** 1 * D
    assert choose_k(2, 2, 1, k_prev=40)[0] == 41


def test_choose_b_next_oracles():
    assert hbed_threshold(1, 1, 1, 64, 2) == 131072
    assert choose_b_next(1, 2, [(1, 1, 64, 2)], 0) == 131074
    # all thresholds below (m+1)!: the factorial term binds
    assert choose_b_next(3, 1, [(3, 0, 1, 0)], 0) == 30
    # an older h = 2 constraint that is larger binds
    older, newer = (1, 1, 2**20, 2), (2, 1, 2, 3)
    b = choose_b_next(2, 2, [older, newer], 0)
    assert b > hbed_threshold(1, 2, 1, 2**20, 2) > hbed_threshold(2, 1, 1, 2, 3)
    assert b % 4 == 0


def test_choose_b_next_respects_budget():
    with pytest.raises(BudgetExceeded):
        choose_b_next(1, 2, [(1, 1, mpz(2) ** 5000, 2)], 0, budget_bits=1000)


def test_smallest_build():
    f, _ = build("co-construct", M=1, s_max=0, b1=2)
    assert f.b[:2] == [1, 2]
    assert f.b[2] == 131074


def test_audit_and_chain(plain, deriv):
    for f, _ in (plain, deriv):
        assert audit(f)
        for m in range(1, len(f.b) - 1):
            div = mpz(1)
            for j in range(1, m + 1 + f.s_max):
                div *= j
            assert f.b[m + 1] % (div * f.b[m]) == 0


def test_eval_with_tail(plain):
    f, _ = plain
    at0 = eval_with_tail(f, RationalInterval.point(0), 1)
    assert at0.contains(1)
    widths = [eval_with_tail(f, RationalInterval.point(1), m).width for m in (1, 2, 3)]
    assert widths == sorted(widths, reverse=True) and widths[2] < widths[0]


def test_stage_certificates_plain(plain):
    f, zeta = plain
    for m in (1, 2, 3):
        c = verify_image(f, zeta, m)
        assert c.holds and c.gcd == 1
        assert c.drauf_margin > 0 and c.tail_margin > 0
        assert recheck_certificate(json.loads(json.dumps(c.to_json())))[0]


def test_stage_one_oracle(plain):
    f, zeta = plain
    c = verify_image(f, zeta, 1)
    assert (c.q, c.k, c.Q) == (2, 5, 4)
    assert c.R % 2 == 1


def test_derivative_certificates(deriv):
    f, zeta = deriv
    for m in (1, 2):
        c = verify_derivative_image(f, 1, zeta, m)
        assert c.holds and c.s == 1
    assert derivative_constant_audit(f)


def test_derivative_needs_strengthening(plain):
    f, zeta = plain
    with pytest.raises(BudgetExceeded):
        verify_derivative_image(f, 1, zeta, 1)


def test_stage_beyond_build(plain):
    f, zeta = plain
    with pytest.raises(DomainError):
        verify_image(f, zeta, 9)


def test_rational_images(deriv):
    f, _ = deriv
    (w1,) = verify_rational_image(f, mpq(1), [1])
    assert (w1.Q, w1.A) == (f.b[1], f.b[1] + 1)
    ws = verify_rational_image(f, mpq(1, 2), [1, 2, 3])
    assert ws[0].exponent.hi < ws[1].exponent.lo and ws[1].exponent.hi < ws[2].exponent.lo
    with pytest.raises(DomainError):
        verify_rational_image(f, mpq(0), [1])


def test_manifest_round_trip(deriv):
    f, zeta = deriv
    g = HauptFunction.from_manifest(json.loads(json.dumps(f.to_manifest())))
    assert g.b == f.b and g.s_max == f.s_max
    z = zeta_from_descriptor(f.to_manifest()["zeta"])
    assert z.enclosure(200).overlaps(zeta.enclosure(200))


def test_tampered_certificate_is_rejected(plain):
    f, zeta = plain
    d = verify_image(f, zeta, 2).to_json()
    d["R"] = str(int(d["R"]) + 2)
    assert not recheck_certificate(d)[0]
    d = verify_image(f, zeta, 2).to_json()
    d["Q"] = str(int(d["Q"]) * 3)
    assert not recheck_certificate(d)[0]
    assert StageCertificate.from_json(verify_image(f, zeta, 1).to_json()).holds


def test_analytic_stage_one_and_truncation(L):
    f, zeta = build("analytic", M=3, zeta=L, phi="10^(x+1)!")
    assert f.M == 1 and "stage 2" in f.truncation
    c = verify_image(f, zeta, 1)
    assert c.holds and c.q == mpz(10) ** 720 and c.gcd == 1
