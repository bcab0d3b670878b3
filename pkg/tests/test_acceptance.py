"""Acceptance criteria 1-12, one test each; every test logs a PASS/FAIL line before asserting.

Family L-values are held in session stores that never touch disk, so each run recomputes them.
"""

import math
import time

import numpy as np
import pytest

from qtwist.arithmetic import (divisor_count_table, kronecker, odd_squarefree_mask, primes_up_to, spf_sieve)
from qtwist.cache import LValueStore
from qtwist.eigenform import generate_eigenform
from qtwist.lcentral import (central_derivative, central_value, completed_lambda, derivative_from_lambda,
                             predicted_first_moment, predicted_first_moment_derivative, root_number)
from qtwist.mollifier import (build_blocks, build_schedule, ebound_check, lem1_check, mollifier_direct,
                              mollifier_expansion, mollifier_values)
from qtwist.suites import _ebound_grid
from qtwist.sweep import (brute_force_sweep, charsum_average, empirical_first_moment, family_members,
                          family_sweep, holder_check, holder_holds, lower_bound_ratio, mertens_sums)

SEED = 20240601


@pytest.fixture(scope="session")
def stores():
    memo = {}

    def get(kernel):
        key = (kernel.weight, kernel.m, kernel.test_function)
        if key not in memo:
            memo[key] = LValueStore(kernel, persist=False)
        return memo[key]
    return get


def _sample(hi, count, seed=SEED):
    ds = np.nonzero(odd_squarefree_mask(hi + 1))[0]
    rng = np.random.default_rng(seed)
    return sorted(int(d) for d in rng.choice(ds, size=count, replace=False))


def _fit_slope(Xs, vals):
    A = np.array([[x * math.log(x), x] for x in Xs])
    return float(np.linalg.lstsq(A, np.array(vals), rcond=None)[0][0])


def test_criterion_01_kronecker(record):
    t0 = time.perf_counter()
    ps = [int(p) for p in primes_up_to(499)[1:]]
    euler = all(kronecker(a, p) % p == pow(a, (p - 1) // 2, p) for p in ps for a in range(1, p))
    recip = all(kronecker(p, q) * kronecker(q, p) == (-1) ** ((p - 1) * (q - 1) // 4)
                for p in ps for q in ps if p != q)
    dt = time.perf_counter() - t0
    ok = record(1, euler and recip and dt < 5,
                f"Euler criterion {euler}, reciprocity {recip}, {len(ps)} primes, {dt:.2f}s")
    assert ok


def test_criterion_02_eigenvalues(record):
    n_max = 10**5
    t0 = time.perf_counter()
    tables = {w: generate_eigenform(w, n_max) for w in (12, 18)}
    spf = spf_sieve(n_max)
    dn = divisor_count_table(n_max)
    ps = primes_up_to(n_max)
    n = np.arange(2, n_max + 1)
    details, ok = [], True
    for w, t in tables.items():
        lam = t.lam
        one = lam[1] == 1.0
        deligne_p = bool(np.all(np.abs(lam[ps]) <= 2))
        deligne_n = bool(np.all(np.abs(lam[1:]) <= dn[1:] * (1 + 1e-12)))
        # split n = p^a m with p the smallest prime factor and gcd(p, m) = 1
        p = spf[n]
        pa = p.copy()
        while True:
            more = (n % (pa * p) == 0)
            if not more.any():
                break
            pa[more] *= p[more]
        m = n // pa
        comp = m > 1
        mult = float(np.max(np.abs(lam[n[comp]] - lam[pa[comp]] * lam[m[comp]])))
        pw = ~comp
        q, qa = p[pw], pa[pw]
        deeper = qa > q
        hecke = float(np.max(np.abs(lam[qa[deeper]] - (lam[q[deeper]] * lam[qa[deeper] // q[deeper]]
                                                       - lam[qa[deeper] // (q[deeper] ** 2)]))))
        good = one and deligne_p and deligne_n and mult < 1e-10 and hecke < 1e-10
        ok &= good
        details.append(f"weight {w}: lam(1)=1 {one}, Deligne p {deligne_p}, d(n) {deligne_n}, "
                       f"mult {mult:.1e}, Hecke {hecke:.1e}")
    dt = time.perf_counter() - t0
    ok = record(2, ok and dt < 60, "; ".join(details) + f"; {dt:.1f}s with generation")
    assert ok


def test_criterion_03_afe(record, table12, table18, kernels):
    t0 = time.perf_counter()
    ds = _sample(5000, 50)
    few = ds[::5][:10]
    swap12 = max(abs(central_value(table12, kernels(12, 1), d) - central_value(table12, kernels(12, 1, "cos6"), d))
                 for d in ds)
    swap18 = max(abs(central_derivative(table18, kernels(18, 2), d)
                     - central_derivative(table18, kernels(18, 2, "cos6"), d)) for d in ds)
    fe = 0.0
    for table in (table12, table18):
        for d in few:
            l3, l7 = completed_lambda(table, 0.3, d), completed_lambda(table, 0.7, d)
            fe = max(fe, abs(l3 - root_number(table.weight, 8 * d) * l7) / abs(l3))
    vanish = max(abs(central_value(table18, kernels(18, 1), d)) for d in ds)
    vanish_l = max(abs(completed_lambda(table18, 0.5, d) / completed_lambda(table18, 0.3, d)) for d in few)
    fd = max(abs(central_derivative(table18, kernels(18, 2), d) / derivative_from_lambda(table18, d) - 1)
             for d in few)
    dt = time.perf_counter() - t0
    ok = (swap12 < 1e-8 and swap18 < 1e-8 and fe < 1e-8 and vanish < 1e-8 and vanish_l < 1e-8
          and fd < 1e-5 and dt < 300)
    ok = record(3, ok, f"G-swap {swap12:.1e}/{swap18:.1e}, FE {fe:.1e}, vanishing {vanish:.1e} "
                       f"(Lambda {vanish_l:.1e}), FD rel {fd:.1e}, {dt:.0f}s")
    assert ok


def test_criterion_04_character_average(record):
    t0 = time.perf_counter()
    X = 1e5
    parts, ok = [], True
    for n in (1, 9, 25, 3, 5, 7):
        emp, main, budget = charsum_average(n, X)
        if main:
            r = emp / main
            ok &= 0.95 <= r <= 1.05
            parts.append(f"n={n} ratio {r:.4f}")
        else:
            ok &= abs(emp) <= budget
            parts.append(f"n={n} |sum|/budget {abs(emp) / budget:.3f}")
    dt = time.perf_counter() - t0
    ok = record(4, ok and dt < 60, ", ".join(parts) + f", {dt:.1f}s")
    assert ok


def test_criterion_05_first_moment(record, table12, kernels, stores):
    X = 2e4
    k1 = kernels(12, 1)
    parts, ok = [], True
    for l in (1, 3, 5, 9):
        emp = empirical_first_moment(table12, k1, l, X, store=stores(k1))
        pred, _ = predicted_first_moment(table12, l, X, 10**6)
        r = emp / pred
        ok &= abs(r - 1) <= 0.10
        parts.append(f"l={l} ratio {r:.4f}")
    ok = record(5, ok, ", ".join(parts))
    assert ok


def test_criterion_06_derivative_moment(record, table18, kernels, stores):
    k2 = kernels(18, 2)
    Xs = [5e3, 1e4, 2e4]
    emp = [empirical_first_moment(table18, k2, 1, X, store=stores(k2)) for X in Xs]
    pred = [predicted_first_moment_derivative(table18, 1, X) for X in Xs]
    r = emp[-1] / pred[-1]
    ce, cp = _fit_slope(Xs, emp), _fit_slope(Xs, pred)
    ok = abs(r - 1) <= 0.10 and ce * cp > 0 and abs(ce / cp - 1) <= 0.25
    ok = record(6, ok, f"ratio at X=2e4 {r:.4f}, log-slope empirical {ce:.4f} predicted {cp:.4f}")
    assert ok


def test_criterion_07_holder(record, table18, kernels, stores):
    X = 1e4
    k2 = kernels(18, 2)
    s = build_schedule(5, 1, X, "practical")
    b = build_blocks(s)
    parts, ok = [], True
    for k in (0.75, 1.0):
        rep = family_sweep(table18, k2, X, k, s, b, store=stores(k2))
        rel = holder_check(rep) / abs(rep.S_moll)
        ok &= holder_holds(rep, 1e-9)
        parts.append(f"k={k} relative slack {rel:.4e}")
    ok = record(7, ok, ", ".join(parts))
    assert ok


def test_criterion_08_block_and_truncation(record, table18):
    t0 = time.perf_counter()
    X = 1e4
    s = build_schedule(5, 1, X, "practical")
    b = build_blocks(s)
    ds, _ = family_members(X)
    rng = np.random.default_rng(SEED)
    sample = rng.choice(ds, size=1000, replace=False)
    lem = all(ok for k in (0.75, 1.0, 2.0) for d in sample for ok, _ in lem1_check(int(d), k, s, b, table18))
    grid = list(_ebound_grid())
    eb = all(ebound_check(z, K, a)[0] for z, K, a in grid)
    dt = time.perf_counter() - t0
    ok = record(8, lem and eb and dt < 60,
                f"block inequality {lem} on 1000 d x 3 k, truncation bound {eb} on {len(grid)} points, {dt:.1f}s")
    assert ok


def test_criterion_09_mollifier_equivalence(record, table18):
    t0 = time.perf_counter()
    small = build_schedule(5, 1, 1e4, "practical", ell1=6, Y=13.0)
    sb = build_blocks(small)
    block = sb.primes[0].tolist()
    ds = _sample(10**4, 100)
    worst = max(abs(mollifier_direct(d, 1.0, small, sb, table18).value
                    - mollifier_expansion(d, 1.0, small, sb, table18))
                / abs(mollifier_direct(d, 1.0, small, sb, table18).value) for d in ds)
    low = math.inf
    for X in (1e4, 2.0**15):
        s = build_schedule(5, 1, X, "practical")
        fam, _ = family_members(X)
        low = min(low, float(mollifier_values(fam, 1.0, s, build_blocks(s), table18).min()))
    dt = time.perf_counter() - t0
    ok = record(9, len(block) == 5 and worst < 1e-10 and low > 0 and dt < 60,
                f"block {block}, l=6, max rel diff {worst:.1e}, min mollifier {low:.4g}, {dt:.1f}s")
    assert ok


def test_criterion_10_lower_bound(record, table18, kernels, stores):
    k2 = kernels(18, 2)
    reps = []
    for e in (12, 13, 14, 15):
        X = 2.0**e
        s = build_schedule(5, 1, X, "practical")
        reps.append(family_sweep(table18, k2, X, 1.0, s, build_blocks(s), store=stores(k2)))
    res = lower_bound_ratio(reps)
    cs = ", ".join(f"c(2^{e})={c:.5g}" for e, c in zip((12, 13, 14, 15), res["c"]))
    ok = record(10, res["positive"] and res["spread"] <= 2, f"{cs}, spread {res['spread']:.4f}")
    assert ok


def test_criterion_11_prime_sums(record, table12):
    t0 = time.perf_counter()
    grid = sorted({int(x) for x in np.geomspace(1e3, 1e7, 41)})
    rows = mertens_sums(table12, grid)
    lo = min(r["logp_resid"] for r in rows)
    hi = max(r["logp_resid"] for r in rows)
    by = {r["x"]: r for r in rows}
    drift = abs(by[10**7]["lam2_resid"] - by[10**5]["lam2_resid"])
    dt = time.perf_counter() - t0
    ok = record(11, -2 <= lo and hi <= 0 and drift <= 0.2 and dt < 60,
                f"log p/p residual in [{lo:.4f}, {hi:.4f}] on {len(grid)} points, lam^2/p drift {drift:.5f}, "
                f"{dt:.1f}s")
    assert ok


def test_criterion_12_determinism(record, table18, kernels):
    t0 = time.perf_counter()
    k2 = kernels(18, 2)
    X = 4000.0
    s = build_schedule(5, 1, X, "practical")
    b = build_blocks(s)
    aggs = []
    for threads in (1, 4, 8):
        rep = family_sweep(table18, k2, X, 1.0, s, b, workers=threads, store=LValueStore(k2, persist=False))
        mom = empirical_first_moment(table18, k2, 1, X, threads, LValueStore(k2, persist=False))
        aggs.append((rep.S_moll, rep.S_norm, rep.S_raw, mom, rep.lvalue.tobytes()))
    same = all(a == aggs[0] for a in aggs[1:])
    Xb = 1000.0
    sb = build_schedule(5, 1, Xb, "practical")
    bb = build_blocks(sb)
    rep = family_sweep(table18, k2, Xb, 1.0, sb, bb)
    rows, sm, sn, sr = brute_force_sweep(table18, k2, Xb, 1.0, sb, bb)
    gap = max(abs(rep.S_moll / sm - 1), abs(rep.S_norm / sn - 1), abs(rep.S_raw / sr - 1),
              float(np.max(np.abs(np.array([r[2] for r in rows]) - rep.lvalue))))
    dt = time.perf_counter() - t0
    ok = record(12, same and gap < 1e-12 and dt < 60,
                f"threads 1/4/8 bit-identical {same}, brute force max gap {gap:.1e} at X=1e3, {dt:.1f}s")
    assert ok
