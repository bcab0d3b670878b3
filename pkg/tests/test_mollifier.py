import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtwist.arithmetic import kronecker
from qtwist.errors import DomainError, RangeError, ResourceError
from qtwist.mollifier import (MollifierSchedule, PrimeBlocks, block_bounds, block_monomials, build_blocks,
                              build_schedule, chi_on_block, ebound_check, lem1_check, max_support,
                              mollifier_direct, mollifier_expansion, mollifier_values, prime_poly,
                              prime_polys, r_k, reciprocal_length_sum, schedule_mertens_check,
                              stirling_check, trunc_exp)


def test_strict_schedule_examples():
    s = build_schedule(5, 1, 1e100, "paper")
    # l_1 = 2 ceil(5 log log 1e100) = 56, l_2 = 2 ceil(5 log 56) = 42 >= sqrt(56)
    assert s.lengths == (56, 42) and not s.paper_feasible
    s = build_schedule(5, 1, 1e4, "paper")
    assert s.lengths == (24,) and s.paper_feasible and s.R == 1
    assert reciprocal_length_sum(s) == (1 / 24, 2 / 24)


def test_strict_blocks_empty_at_desk_scale():
    s = build_schedule(5, 1, 1e4, "paper")
    assert block_bounds(s)[0][1] == pytest.approx(1e4 ** (1 / 576))
    with pytest.warns(RuntimeWarning, match="empty prime blocks"):
        b = build_blocks(s)
    assert b.empty == (0,) and len(b.primes[0]) == 0


def test_practical_schedule():
    s = build_schedule(5, 1, 1e4, "practical")
    assert s.lengths == (10,) and s.Y == 100.0
    b = build_blocks(s)
    assert b.primes[0].tolist()[:5] == [3, 5, 7, 11, 13] and b.primes[0][-1] == 97
    s2 = build_schedule(5, 1, 1e4, "practical", ell1=100, R=2, Y=20)
    assert s2.lengths == (100, 48)
    assert block_bounds(s2)[1] == (20.0, pytest.approx(20 ** ((100 / 48) ** 2)))
    with pytest.raises(DomainError):
        build_schedule(5, 1, 1e4, "practical", ell1=10, R=2)
    with pytest.raises(DomainError):
        build_schedule(5, 1, 1e4, "practical", ell1=7)
    with pytest.raises(DomainError):
        build_schedule(5, 1, 1e4, "sideways")
    with pytest.raises(DomainError):
        build_schedule(0, 1, 1e4)
    with pytest.raises(RangeError):
        build_blocks(s, prime_bound=50)


def test_trunc_exp_values():
    assert trunc_exp(2, 1.0) == 2.5
    assert trunc_exp(0, 3.0) == 1.0
    assert trunc_exp(4, np.array([0.0, -1.0])).tolist() == pytest.approx([1.0, 0.375], abs=1e-16)
    with pytest.raises(DomainError):
        trunc_exp(-1, 1.0)


@pytest.mark.parametrize("ell,x", [(40, -30.0), (100, -60.0), (10, -3.5), (24, 5.0)])
def test_trunc_exp_against_mpmath(ell, x):
    with mpmath.workdps(80):
        ref = float(mpmath.fsum(mpmath.mpf(x) ** j / mpmath.factorial(j) for j in range(ell + 1)))
    assert trunc_exp(ell, x) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30).map(lambda k: 2 * k), st.floats(-80, 80))
def test_even_truncation_positive(ell, x):
    assert trunc_exp(ell, x) > 0


def test_single_prime_block_by_hand(table18):
    # block {3}, l = 2: N = 1 + a lam(3) chi(3)/sqrt 3 + a^2 lam(3)^2 / (2 * 3)
    s = MollifierSchedule(5, 1, 1e4, (2,), "practical", False, 4.0)
    b = PrimeBlocks((np.array([3]),), ((2.0, 4.0),))
    lam3 = float(table18.lam[3])
    for d in (5, 7, 11, 13):
        c = kronecker(8 * d, 3)
        for a in (0.5, 1.0, 3.0):
            hand = 1 + a * lam3 * c / math.sqrt(3) + a * a * lam3**2 / 6
            assert mollifier_direct(d, a, s, b, table18).value == pytest.approx(hand, rel=1e-14)
            assert mollifier_expansion(d, a, s, b, table18) == pytest.approx(hand, rel=1e-14)
    assert mollifier_expansion(3, 1.0, s, b, table18) == 1.0


def test_expansion_matches_direct_on_five_primes(table18):
    s = build_schedule(5, 1, 1e4, "practical", ell1=6, Y=13)
    b = build_blocks(s)
    assert b.primes[0].tolist() == [3, 5, 7, 11, 13]
    for d in (1, 15, 101, 4199, 9997):
        a = mollifier_direct(d, 1.0, s, b, table18).value
        assert mollifier_expansion(d, 1.0, s, b, table18) == pytest.approx(a, rel=1e-12)
    assert max_support(s, b) == [13**6]


def test_block_monomials():
    mons = list(block_monomials([3, 5, 7], 3))
    assert len(mons) == math.comb(6, 3)
    assert len({tuple(m) for m in mons}) == len(mons)
    assert all(sum(m) <= 3 for m in mons)
    with pytest.raises(ResourceError):
        list(block_monomials(list(range(24)), 10))


def test_characters_and_polys(table18):
    block = np.array([3, 5, 7, 11, 97])
    ds = np.array([1, 3, 35, 1001, 9999])
    chi = chi_on_block(ds, block)
    assert chi.tolist() == [[kronecker(8 * int(d), int(p)) for p in block] for d in ds]
    s = build_schedule(5, 1, 1e4, "practical")
    b = build_blocks(s)
    polys = prime_polys(ds, b, table18)
    assert polys[:, 0].tolist() == pytest.approx([prime_poly(int(d), b.primes[0], table18) for d in ds], abs=1e-14)
    vals = mollifier_values(ds, 1.0, s, b, table18)
    assert vals.tolist() == pytest.approx([mollifier_direct(int(d), 1.0, s, b, table18).value for d in ds],
                                          rel=1e-13)


def test_r_k():
    assert r_k(1.0) == 2 and r_k(0.75) == 3 and r_k(2.0) == 2
    with pytest.raises(DomainError):
        r_k(0.5)


def test_block_inequality_holds(table18):
    s = build_schedule(5, 1, 1e4, "practical")
    b = build_blocks(s)
    for d in (1, 3, 5, 7, 4199):
        for k in (0.75, 1.0, 2.0):
            assert all(ok for ok, _ in lem1_check(d, k, s, b, table18))


def test_truncation_bound():
    ok, err, mid, outer = ebound_check(0.5 + 0.5j, 20, 1.0)
    assert ok and err < mid < outer
    # tiny |z| needs extra working precision to resolve the error
    assert ebound_check(0.1, 40, 0.5)[0]
    with pytest.raises(DomainError):
        ebound_check(2.0, 20, 1.0)
    with pytest.raises(DomainError):
        ebound_check(0.1, 20, 3.0)


def test_stirling_boundary():
    assert stirling_check(1) == (True, False)
    assert [stirling_check(n)[1] for n in range(1, 8)] == [False] * 6 + [True]
    assert all(all(stirling_check(n)) for n in range(7, 171))
    with pytest.raises(DomainError):
        stirling_check(171)


def test_schedule_mertens_band(table18):
    s = build_schedule(5, 1, 1e4, "practical")
    rows = schedule_mertens_check(s, build_blocks(s), table18)
    assert rows[0]["lo"] == 0.5 and rows[0]["hi"] == 4.0
    assert rows[0]["in_band"]
