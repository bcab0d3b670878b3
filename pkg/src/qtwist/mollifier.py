"""Mollifiers built from truncated exponentials of short prime polynomials.

    P_j(d) = sum_{p in P_j} lam(p) chi_{8d}(p) / sqrt(p)
    N_j(d, alpha) = E_{l_j}(alpha P_j(d)),   N(d, alpha) = prod_j N_j(d, alpha)

E_l is the degree-l Taylor polynomial of exp; for even l it is positive on
the whole real line, so every N_j is positive.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import mpmath
import numpy as np
from scipy.special import gammaln

from .arithmetic import kronecker, primes_up_to
from .eigenform import EigenformTable
from .errors import DomainError, RangeError, ResourceError

EXPANSION_CAP = 10**7


@dataclass(frozen=True)
class MollifierSchedule:
    N: int
    M: int
    X: float
    lengths: tuple
    mode: str
    paper_feasible: bool
    Y: float | None = None

    @property
    def R(self) -> int:
        return len(self.lengths)


def _next_length(N: int, ell: int) -> int:
    return 2 * math.ceil(N * math.log(ell))


def _feasible(lengths, M) -> bool:
    chain = all(a > b * b for a, b in zip(lengths, lengths[1:]))
    return chain and lengths[-1] > 10**M


def build_schedule(N: int, M: int, X: float, mode: str = "paper", ell1: int | None = None,
                   R: int | None = None, Y: float | None = None) -> MollifierSchedule:
    """Block lengths l_1 > l_2 > ... (natural logarithms throughout).

    Paper mode follows l_1 = 2 ceil(N log log X), l_{j+1} = 2 ceil(N log l_j)
    while l_j > 10^M, and stops at the first l_{j+1} >= l_j^{1/2} (kept, so
    the infeasibility is visible) or when the recursion stalls.  Practical
    mode takes l_1, R and the first block bound Y as given.
    """
    if N < 1 or M < 1:
        raise DomainError("N and M must be >= 1")
    if X < 16:
        raise DomainError("X must be >= 16")
    if mode == "paper":
        lengths = [2 * math.ceil(N * math.log(math.log(X)))]
        while lengths[-1] > 10**M:
            nxt = _next_length(N, lengths[-1])
            if nxt <= 10**M or nxt >= lengths[-1]:
                break
            lengths.append(nxt)
            if lengths[-2] <= nxt * nxt:
                break
        return MollifierSchedule(N, M, X, tuple(lengths), mode, _feasible(lengths, M))
    if mode != "practical":
        raise DomainError(f"unknown schedule mode {mode!r}")
    ell1 = 10 if ell1 is None else int(ell1)
    R = 1 if R is None else int(R)
    Y = 100.0 if Y is None else float(Y)
    if ell1 <= 0 or ell1 % 2:
        raise DomainError(f"l_1 must be a positive even integer, got {ell1}")
    if R < 1 or Y < 3:
        raise DomainError("need R >= 1 and Y >= 3")
    lengths = [ell1]
    for _ in range(R - 1):
        nxt = max(2, _next_length(N, lengths[-1]))
        if nxt >= lengths[-1]:
            raise DomainError(f"l_{len(lengths) + 1} = {nxt} does not decrease from {lengths[-1]}; "
                              "raise l_1, lower N or use fewer blocks")
        lengths.append(nxt)
    return MollifierSchedule(N, M, X, tuple(lengths), mode, _feasible(lengths, M), Y)


def reciprocal_length_sum(schedule: MollifierSchedule) -> tuple[float, float]:
    """(sum 1/l_j, 2/l_R)."""
    return sum(1.0 / l for l in schedule.lengths), 2.0 / schedule.lengths[-1]


@dataclass(frozen=True)
class PrimeBlocks:
    primes: tuple
    bounds: tuple
    empty: tuple = field(default=())


def block_bounds(schedule: MollifierSchedule) -> list[tuple[float, float]]:
    """(lo, hi] per block: X^{1/l_j^2} in paper mode, Y^{(l_1/l_j)^2} in practical mode."""
    if schedule.mode == "paper":
        tops = [schedule.X ** (1.0 / l**2) for l in schedule.lengths]
    else:
        l1 = schedule.lengths[0]
        tops = [schedule.Y ** ((l1 / l) ** 2) for l in schedule.lengths]
    los = [2.0] + tops[:-1]
    return list(zip(los, tops))


def build_blocks(schedule: MollifierSchedule, prime_bound: int | None = None) -> PrimeBlocks:
    """Realise the odd-prime blocks; empty blocks are flagged with a warning.

    ``prime_bound`` is the reach of the caller's prime tables, if limited.
    """
    bounds = block_bounds(schedule)
    top = int(bounds[-1][1])
    limit = 10**8 if prime_bound is None else min(prime_bound, 10**8)
    if top > limit:
        raise RangeError(f"blocks need primes up to {top}, tables reach {limit}")
    primes = primes_up_to(top)
    blocks = []
    empty = []
    for j, (lo, hi) in enumerate(bounds):
        sel = primes[(primes > lo) & (primes <= hi) & (primes != 2)]
        blocks.append(np.array(sel, dtype=np.int64))
        if len(sel) == 0:
            empty.append(j)
    if empty:
        warnings.warn(f"empty prime blocks: {[j + 1 for j in empty]}", RuntimeWarning, stacklevel=2)
    return PrimeBlocks(tuple(blocks), tuple(bounds), tuple(empty))


def _legendre_table(p: int) -> np.ndarray:
    leg = -np.ones(p, dtype=np.int8)
    leg[0] = 0
    leg[(np.arange(1, (p + 1) // 2, dtype=np.int64) ** 2) % p] = 1
    return leg


def chi_on_block(ds, block) -> np.ndarray:
    """chi_{8d}(p) for every d (rows) and p in the block (columns)."""
    ds = np.asarray(ds, dtype=np.int64)
    out = np.empty((len(ds), len(block)), dtype=np.int8)
    for j, p in enumerate(block):
        out[:, j] = _legendre_table(int(p))[(8 * ds) % int(p)]
    return out


def prime_poly(d: int, block, table: EigenformTable) -> float:
    """sum_{p in block} lam(p) chi_{8d}(p) / sqrt(p)."""
    return math.fsum(float(table.lam[p]) * kronecker(8 * d, int(p)) / math.sqrt(p) for p in block)


def prime_polys(ds, blocks: PrimeBlocks, table: EigenformTable) -> np.ndarray:
    """P_j(d) for all d, shape (len(ds), R)."""
    out = np.zeros((len(ds), len(blocks.primes)))
    for j, block in enumerate(blocks.primes):
        if len(block):
            w = table.lam[block] / np.sqrt(block)
            out[:, j] = chi_on_block(ds, block) @ w
    return out


def trunc_exp(ell: int, x):
    """E_ell(x) = sum_{j <= ell} x^j / j!, Horner from the top coefficient.

    For x < 0 with ell large the alternating terms can dwarf the result; such
    points are redone in mpmath at a precision covering the largest term.
    """
    if ell < 0 or ell > 10**4:
        raise DomainError("need 0 <= ell <= 10^4")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    s = np.ones_like(x)
    for j in range(ell, 0, -1):
        s = 1.0 + s * x / j
    neg = np.nonzero(x < 0)[0]
    if len(neg):
        ax = -x[neg]
        jm = np.minimum(np.floor(ax), ell)
        log_big = jm * np.log(np.maximum(ax, 1e-300)) - gammaln(jm + 1)
        with np.errstate(divide="ignore"):
            lost = log_big - np.log(np.abs(s[neg]))
        for i in neg[lost > math.log(1e4)]:
            s[i] = _trunc_exp_mp(ell, float(x[i]))
    return float(s[0]) if scalar else s


def _trunc_exp_mp(ell: int, x: float) -> float:
    digits = int(abs(x) / math.log(10)) + 30
    with mpmath.workdps(digits):
        s = mpmath.mpf(1)
        xm = mpmath.mpf(x)
        for j in range(ell, 0, -1):
            s = 1 + s * xm / j
        return float(s)


@dataclass(frozen=True)
class MollifierValue:
    d: int
    polys: tuple
    factors: tuple
    value: float


def mollifier_direct(d: int, alpha: float, schedule: MollifierSchedule, blocks: PrimeBlocks,
                     table: EigenformTable) -> MollifierValue:
    polys = tuple(prime_poly(d, b, table) for b in blocks.primes)
    factors = tuple(trunc_exp(l, alpha * p) for l, p in zip(schedule.lengths, polys))
    return MollifierValue(d, polys, factors, math.prod(factors))


def mollifier_values(ds, alpha: float, schedule: MollifierSchedule, blocks: PrimeBlocks,
                     table: EigenformTable) -> np.ndarray:
    """N(d, alpha) for many d at once."""
    polys = prime_polys(ds, blocks, table)
    out = np.ones(len(ds))
    for j, ell in enumerate(schedule.lengths):
        out *= trunc_exp(ell, alpha * polys[:, j])
    return out


def block_monomials(block, ell: int, cap: int = EXPANSION_CAP):
    """Exponent vectors of all n built from block primes with Omega(n) <= ell (with multiplicity)."""
    k = len(block)
    total = math.comb(k + ell, ell)
    if total > cap:
        raise ResourceError(f"expansion has {total} terms per block, cap is {cap}")
    for size in range(ell + 1):
        for combo in combinations_with_replacement(range(k), size):
            exps = [0] * k
            for i in combo:
                exps[i] += 1
            yield exps


def expansion_terms(block, ell: int, table: EigenformTable, cap: int = EXPANSION_CAP):
    """Yield (n, Omega, w(n), lam~(n)) for the block's Dirichlet polynomial support."""
    block = [int(p) for p in block]
    lam = [float(table.lam[p]) for p in block]
    for exps in block_monomials(block, ell, cap):
        n = 1
        lt = 1.0
        w = 1
        for p, a, lp in zip(block, exps, lam):
            if a:
                n *= p**a
                lt *= lp**a
                w *= math.factorial(a)
        yield n, sum(exps), w, lt, exps


def mollifier_expansion(d: int, alpha: float, schedule: MollifierSchedule, blocks: PrimeBlocks,
                        table: EigenformTable, cap: int = EXPANSION_CAP) -> float:
    """The same product, summed as the Dirichlet polynomial
    sum_n lam~(n) alpha^Omega(n) chi_{8d}(n) / (w(n) sqrt(n)) per block."""
    value = 1.0
    for ell, block in zip(schedule.lengths, blocks.primes):
        chi = [kronecker(8 * d, int(p)) for p in block]
        terms = []
        for n, om, w, lt, exps in expansion_terms(block, ell, table, cap):
            c = 1
            for ch, a in zip(chi, exps):
                if a:
                    c *= ch**a
            if c:
                terms.append(lt * alpha**om * c / (w * math.sqrt(n)))
        value *= math.fsum(terms)
    return value


def max_support(schedule: MollifierSchedule, blocks: PrimeBlocks) -> list[int]:
    """Largest n in each block's expansion: (max prime)^{l_j}."""
    return [int(b[-1]) ** l if len(b) else 1 for l, b in zip(schedule.lengths, blocks.primes)]


# ---------------------------------------------------------------------------
# pointwise inequalities


def r_k(k: float) -> int:
    if k <= 0.5:
        raise DomainError("k must exceed 1/2")
    return 1 + math.ceil(k / (2 * k - 1))


def lem1_check(d: int, k: float, schedule: MollifierSchedule, blocks: PrimeBlocks,
               table: EigenformTable, rtol: float = 1e-9) -> list[tuple[bool, float]]:
    """Per block: N_j(d,2k-1)^{2k/(2k-1)} <= N_j(d,2k)(1+e^-l)^{2k/(2k-1)}/(1-e^-l)^2 + Q_j(d).

    Returns (holds, relative slack) per block.
    """
    rk = r_k(k)
    e = 2 * k / (2 * k - 1)
    out = []
    for ell, block in zip(schedule.lengths, blocks.primes):
        P = prime_poly(d, block, table)
        lhs = trunc_exp(ell, (2 * k - 1) * P) ** e
        main = trunc_exp(ell, 2 * k * P) * (1 + math.exp(-ell)) ** e / (1 - math.exp(-ell)) ** 2
        try:
            Q = (124 * k * k * P / ell) ** (2 * rk * ell)
        except OverflowError:
            Q = math.inf
        rhs = main + Q
        slack = 1.0 if math.isinf(rhs) else (rhs - lhs) / rhs
        out.append((lhs <= rhs * (1 + rtol), slack))
    return out


def ebound_check(z: complex, K: int, a: float) -> tuple[bool, float, float, float]:
    """|E_K(z) - e^z| <= |z|^K/K! <= (a e/20)^K for |z| <= a K/20, 0 < a <= 2.

    Returns (holds, error, middle bound, outer bound); evaluated in mpmath.
    """
    if not 0 < a <= 2:
        raise DomainError("need 0 < a <= 2")
    if abs(z) > a * K / 20 * (1 + 1e-12):
        raise DomainError("|z| exceeds aK/20")
    # the error can sit far below 1e-40, so size the precision from the bound
    scale = (math.lgamma(K + 1) - K * math.log(abs(z))) / math.log(10) if z else 0.0
    with mpmath.workdps(int(max(scale, 0.0)) + 40):
        zm = mpmath.mpc(z)
        s = mpmath.mpf(0)
        term = mpmath.mpf(1)
        for r in range(K + 1):
            s += term
            term = term * zm / (r + 1)
        err = float(abs(s - mpmath.exp(zm)))
        mid = float(abs(zm) ** K / mpmath.factorial(K))
    outer = (a * math.e / 20) ** K
    return err <= mid * (1 + 1e-9) and mid <= outer * (1 + 1e-9), err, mid, outer


def schedule_mertens_check(schedule: MollifierSchedule, blocks: PrimeBlocks, table: EigenformTable,
                           N: int | None = None) -> list[dict]:
    """Per block: sum lam(p)^2/p against the band [l_j/(4N), 2 l_j/N]."""
    N = schedule.N if N is None else N
    out = []
    for ell, block in zip(schedule.lengths, blocks.primes):
        s = math.fsum(float(table.lam[p]) ** 2 / p for p in block)
        lo, hi = ell / (4 * N), 2 * ell / N
        out.append({"length": ell, "primes": len(block), "sum": s, "lo": lo, "hi": hi,
                    "in_band": lo <= s <= hi})
    return out


def stirling_check(n: int) -> tuple[bool, bool]:
    """(left, right) of (n/e)^n <= n! <= n (n/e)^n, evaluated in mpmath (exact enough)."""
    if not 1 <= n <= 170:
        raise DomainError("need 1 <= n <= 170")
    with mpmath.workdps(50):
        base = (mpmath.mpf(n) / mpmath.e) ** n
        f = mpmath.factorial(n)
        return bool(base <= f), bool(f <= n * base)
