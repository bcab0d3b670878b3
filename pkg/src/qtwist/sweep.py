"""Weighted sums over the family of odd square-free d, and the checks built on them."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .arithmetic import (jacobi_array, kronecker, odd_squarefree_mask, prime_factors_trial, primes_up_to,
                         squarefree_decomposition)
from .cache import LValueStore
from .eigenform import EigenformTable
from .errors import DomainError, RangeError
from .kernel import AfeKernel, kernel_V
from .lcentral import TWO_PI, _z_array, afe_length
from .mollifier import (MollifierSchedule, PrimeBlocks, expansion_terms, mollifier_direct, mollifier_values)
from .smoothing import SUPPORT, mellin_phi, phi_eval

LEAF = 64
TINY = 1e-12


def tree_sum(values) -> float:
    """Fixed-shape reduction: exact fsum on leaves of LEAF entries, then pairwise levels."""
    v = np.asarray(values, dtype=np.float64)
    level = [math.fsum(v[i:i + LEAF]) for i in range(0, len(v), LEAF)] or [0.0]
    while len(level) > 1:
        nxt = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def tree_descriptor(n: int) -> str:
    leaves = max(1, -(-n // LEAF))
    return f"leaf={LEAF} fsum, {leaves} leaves, pairwise depth {max(0, math.ceil(math.log2(leaves)))}"


def family_members(X: float) -> tuple[np.ndarray, np.ndarray]:
    """Odd square-free d < X with Phi(d/X) > 0, and the weights Phi(d/X)."""
    ds = np.nonzero(odd_squarefree_mask(int(math.ceil(X))))[0]
    ds = ds[(ds > SUPPORT[0] * X) & (ds < SUPPORT[1] * X)]
    ph = phi_eval(ds / X)
    keep = ph > 0
    return ds[keep].astype(np.int64), ph[keep]


@dataclass
class MomentReport:
    X: float
    weight: int
    k: float
    alpha: float
    d: np.ndarray
    phi: np.ndarray
    lvalue: np.ndarray
    mollifier: np.ndarray
    moll_power: np.ndarray
    S_moll: float
    S_norm: float
    S_raw: float
    tiny_rows: int
    tree: str
    workers: int
    seconds: float
    meta: dict = field(default_factory=dict)

    def aggregates(self) -> tuple[float, float, float]:
        return self.S_moll, self.S_norm, self.S_raw

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("d,phi,lvalue,mollifier,moll_power\n")
            for row in zip(self.d.tolist(), self.phi, self.lvalue, self.mollifier, self.moll_power):
                fh.write("%d,%.17g,%.17g,%.17g,%.17g\n" % row)


def family_lvalues(table: EigenformTable, kernel: AfeKernel, ds, workers: int = 1,
                   store: LValueStore | None = None) -> np.ndarray:
    """L(1/2) (order-1 kernel, weight 0 mod 4) or L'(1/2) (order-2 kernel, weight 2 mod 4)."""
    if kernel.m == 1 and table.weight % 4 != 0:
        raise DomainError("central values of this family vanish identically (weight = 2 mod 4)")
    if kernel.m == 2 and table.weight % 4 != 2:
        raise DomainError("derivatives are studied for weight = 2 mod 4 only")
    ds = np.asarray(ds, dtype=np.int64)
    if len(ds) and afe_length(kernel, int(ds.max())) > table.n_max:
        raise RangeError(f"table reaches n={table.n_max}, family needs {afe_length(kernel, int(ds.max()))}")
    store = store or LValueStore(kernel, persist=False)
    # both cases are twice the AFE sum: (1 + eps) = 2 for values, 2 V_2 for derivatives
    return 2.0 * store.get(table, ds, workers)


def family_sweep(table: EigenformTable, kernel: AfeKernel, X: float, k: float,
                 schedule: MollifierSchedule, blocks: PrimeBlocks, alpha: float | None = None,
                 workers: int = 1, store: LValueStore | None = None, csv_path=None) -> MomentReport:
    """Per-d rows and the three Hoelder sums

        S_moll = sum* L N(d, a) Phi,  S_norm = sum* N^{2k/(2k-1)} Phi,  S_raw = sum* |L|^{2k} Phi.
    """
    if k <= 0.5:
        raise DomainError("k must exceed 1/2")
    t0 = time.perf_counter()
    alpha = 2 * k - 1 if alpha is None else alpha
    ds, ph = family_members(X)
    if len(ds) and afe_length(kernel, int(ds.max())) > table.n_max:
        raise RangeError(f"table reaches n={table.n_max}, family needs {afe_length(kernel, int(ds.max()))}")
    L = family_lvalues(table, kernel, ds, workers, store)
    N = mollifier_values(ds, alpha, schedule, blocks, table)
    Np = N ** (2 * k / (2 * k - 1))
    absL = np.abs(L)
    tiny = absL < TINY
    raw = np.where(tiny, 0.0, np.exp(2 * k * np.log(np.where(tiny, 1.0, absL))))
    report = MomentReport(X, table.weight, k, alpha, ds, ph, L, N, Np,
                          S_moll=tree_sum(L * N * ph), S_norm=tree_sum(Np * ph), S_raw=tree_sum(raw * ph),
                          tiny_rows=int(tiny.sum()), tree=tree_descriptor(len(ds)), workers=workers,
                          seconds=time.perf_counter() - t0)
    if csv_path is not None:
        report.write_csv(csv_path)
    return report


def brute_force_sweep(table: EigenformTable, kernel: AfeKernel, X: float, k: float,
                      schedule: MollifierSchedule, blocks: PrimeBlocks, alpha: float | None = None):
    """Reference path: every d on its own, Jacobi symbols per n, fsum everywhere."""
    alpha = 2 * k - 1 if alpha is None else alpha
    s_moll, s_norm, s_raw, rows = [], [], [], []
    for d in range(1, int(X)):
        if d % 2 == 0 or any(d % (p * p) == 0 for p in prime_factors_trial(d)):
            continue
        ph = float(phi_eval(d / X))
        if ph <= 0:
            continue
        n = np.arange(1, afe_length(kernel, d) + 1, 2)
        chi = jacobi_array(8 * d, n)
        L = 2.0 * math.fsum(table.lam[n] * chi / np.sqrt(n) * kernel_V(kernel, TWO_PI * n / (8 * d)))
        N = mollifier_direct(d, alpha, schedule, blocks, table).value
        rows.append((d, ph, L, N))
        s_moll.append(L * N * ph)
        s_norm.append(N ** (2 * k / (2 * k - 1)) * ph)
        s_raw.append(abs(L) ** (2 * k) * ph if abs(L) >= TINY else 0.0)
    return rows, math.fsum(s_moll), math.fsum(s_norm), math.fsum(s_raw)


def holder_check(report: MomentReport) -> float:
    """S_raw^{1/2k} S_norm^{(2k-1)/2k} - S_moll (nonnegative by Hoelder)."""
    k = report.k
    return report.S_raw ** (1 / (2 * k)) * report.S_norm ** ((2 * k - 1) / (2 * k)) - report.S_moll


def holder_holds(report: MomentReport, rtol: float = 1e-9) -> bool:
    return holder_check(report) >= -rtol * abs(report.S_moll)


def lower_bound_functional(report: MomentReport) -> float:
    """S_moll^{2k} / S_norm^{2k-1}, a lower bound for S_raw when S_moll > 0."""
    k = report.k
    return max(report.S_moll, 0.0) ** (2 * k) / report.S_norm ** (2 * k - 1)


def lower_bound_ratio(reports: list[MomentReport]) -> dict:
    """c(X) = functional / (X (log X)^{k(2k+1)}) per X, and max/min across X."""
    if len(reports) < 3:
        raise DomainError("need at least three X values")
    cs = []
    for r in reports:
        k = r.k
        cs.append(lower_bound_functional(r) / (r.X * math.log(r.X) ** (2 * k * (2 * k + 1) / 2)))
    pos = all(c > 0 for c in cs)
    return {"X": [r.X for r in reports], "c": cs, "positive": pos,
            "spread": max(cs) / min(cs) if pos else math.inf,
            "bounds_raw": [lower_bound_functional(r) <= r.S_raw * (1 + 1e-9) for r in reports]}


# ---------------------------------------------------------------------------
# character sums


def _zeta2() -> float:
    return math.pi**2 / 6


def charsum_average(n: int, X: float) -> tuple[float, float, float]:
    """(sum* chi_{8d}(n) Phi(d/X), main term, error budget 10 X^0.55 sqrt(n))."""
    if n < 1 or n % 2 == 0:
        raise DomainError("n must be odd and positive")
    ds, ph = family_members(X)
    period = np.array([kronecker(8 * r, n) for r in range(n)], dtype=np.float64)
    emp = tree_sum(period[ds % n] * ph)
    main = 0.0
    if math.isqrt(n) ** 2 == n:
        main = mellin_phi(1).real * 2 * X / (3 * _zeta2())
        for p in prime_factors_trial(n):
            main *= p / (p + 1)
    return emp, main, 10 * X**0.55 * math.sqrt(n)


def empirical_first_moment(table: EigenformTable, kernel: AfeKernel, l: int, X: float,
                           workers: int = 1, store: LValueStore | None = None) -> float:
    """sum* L chi_{8d}(l) Phi(d/X), with L(1/2) or L'(1/2) by the kernel order."""
    if l < 1 or l % 2 == 0:
        raise DomainError("l must be odd and positive")
    ds, ph = family_members(X)
    L = family_lvalues(table, kernel, ds, workers, store)
    period = np.array([kronecker(8 * r, l) for r in range(l)], dtype=np.float64)
    return tree_sum(L * period[ds % l] * ph)


# ---------------------------------------------------------------------------
# prime sums


def mertens_sums(table: EigenformTable, x_grid) -> list[dict]:
    """sum_{p<=x} log p / p and sum_{p<=x} lam(p)^2 / p with their residuals."""
    x_grid = sorted(int(x) for x in x_grid)
    if x_grid[-1] > table.n_max:
        raise RangeError(f"x={x_grid[-1]} beyond table ({table.n_max})")
    ps = primes_up_to(x_grid[-1])
    a = np.cumsum(np.log(ps) / ps)
    b = np.cumsum(table.lam[ps] ** 2 / ps)
    out = []
    for x in x_grid:
        i = np.searchsorted(ps, x, side="right") - 1
        out.append({"x": x, "logp": float(a[i]), "logp_resid": float(a[i] - math.log(x)),
                    "lam2": float(b[i]), "lam2_resid": float(b[i] - math.log(math.log(x)))})
    return out


# ---------------------------------------------------------------------------
# S_1, S_2


def _g_ratio(table: EigenformTable, n: int, primes) -> float:
    """lam(n_1)/g(n) realised as prod_{p | n} Z_p(1/2, n) / Z_p(1/2, 1)."""
    if not primes:
        return 1.0
    l1, l2 = squarefree_decomposition(n)
    ps = np.array(primes, dtype=np.int64)
    lam = table.lam[ps]
    return float(np.prod(_z_array(ps, lam, 0.0, l1, l2) / _z_array(ps, lam, 0.0, 1, 1)))


def block_s_sums_enumerated(table: EigenformTable, block, ell: int, alpha: float) -> tuple[float, float]:
    """(sum_n c(n), sum_n c(n) log n_1) over the block's expansion support, where

        c(n) = lam~(n) lam~(n_1) alpha^Omega(n) / (sqrt(n n_1) w(n) g(n)).

    Term-by-term reference for small blocks; see block_s_sums.
    """
    t, u = [], []
    for n, om, w, lt, exps in expansion_terms(block, ell, table):
        primes = [int(p) for p, a in zip(block, exps) if a]
        n1 = math.prod(int(p) for p, a in zip(block, exps) if a % 2)
        c = lt * alpha**om / (math.sqrt(n * n1) * w) * _g_ratio(table, n, primes)
        t.append(c)
        u.append(c * math.log(n1))
    return math.fsum(t), math.fsum(u)


def _prime_coefficients(table: EigenformTable, p: int, ell: int, alpha: float) -> np.ndarray:
    """c(p^a) for a = 0..ell; c is multiplicative over the block (lam(n_1) sits in the Z ratio)."""
    lam = float(table.lam[p])
    ps = np.array([p], dtype=np.int64)
    lv = np.array([lam])
    z1 = _z_array(ps, lv, 0.0, 1, 1)[0]
    odd = _z_array(ps, lv, 0.0, p, 1)[0] / z1
    even = _z_array(ps, lv, 0.0, 1, p)[0] / z1
    out = np.empty(ell + 1)
    out[0] = 1.0
    for a in range(1, ell + 1):
        e = a + (a % 2)
        out[a] = lam**a * alpha**a / (p ** (e / 2) * math.factorial(a)) * (odd if a % 2 else even)
    return out


def _truncated_product(polys, ell: int) -> np.ndarray:
    acc = np.zeros(ell + 1)
    acc[0] = 1.0
    for q in polys:
        acc = np.convolve(acc, q)[: ell + 1]
    return acc


def block_s_sums(table: EigenformTable, block, ell: int, alpha: float) -> tuple[float, float]:
    """Same sums as block_s_sums_enumerated without listing the support.

    c(n) factors over the block's primes and log n_1 is additive, so both sums are
    coefficient sums of a product of per-prime polynomials in Omega, truncated at ell.
    """
    block = [int(p) for p in block]
    polys = [_prime_coefficients(table, p, ell, alpha) for p in block]
    T = float(_truncated_product(polys, ell).sum())
    U = []
    for j, p in enumerate(block):
        marked = polys[j].copy()
        marked[0::2] = 0.0
        marked *= math.log(p)
        U.append(float(_truncated_product(polys[:j] + [marked] + polys[j + 1:], ell).sum()))
    return T, math.fsum(U)


def s1_s2_diagnostics(table: EigenformTable, schedule: MollifierSchedule, blocks: PrimeBlocks,
                      X: float, k: float) -> dict:
    """S_1 = X log X prod_j T_j and S_2 = X sum_j U_j prod_{i != j} T_i from direct enumeration."""
    alpha = 2 * k - 1
    sums = [block_s_sums(table, b, l, alpha) for l, b in zip(schedule.lengths, blocks.primes)]
    T = [s[0] for s in sums]
    S1 = X * math.log(X) * math.prod(T)
    S2 = X * math.fsum(sums[j][1] * math.prod(T[:j] + T[j + 1:]) for j in range(len(sums)))
    return {"S1": S1, "S2": S2, "positive": S1 - S2 > 0, "block_sums": sums}
