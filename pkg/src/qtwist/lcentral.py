"""Central values and derivatives of L(s, f x chi_{8d}), plus first-moment predictions."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, gammaln

from .arithmetic import chi8d_table, fill_chi8d_table, prime_factors_trial, primes_up_to, squarefree_decomposition
from .eigenform import EigenformTable
from .errors import DomainError, RangeError
from .kernel import AfeKernel, hermite5, kernel_V
from .smoothing import mellin_phi

TWO_PI = 2.0 * math.pi
CHUNK = 16


def root_number(weight: int, d: int) -> int:
    """i^k * sign(d) as +1 / -1."""
    if weight % 2:
        raise DomainError("weight must be even")
    if d == 0:
        raise DomainError("d must be nonzero")
    ik = 1 if weight % 4 == 0 else -1
    return ik if d > 0 else -ik


def _check_d(d: int) -> None:
    if d < 1 or d % 2 == 0 or any(d % (p * p) == 0 for p in prime_factors_trial(d)):
        raise DomainError(f"d={d} is not an odd square-free positive integer")


def afe_length(kernel: AfeKernel, d: int) -> int:
    """Largest n with 2 pi n / 8d <= x_cut."""
    return int(kernel.x_cut * 8 * d / TWO_PI)


class _Scaled:
    """lambda(n)/sqrt(n) and log n for a table, built once and shared read-only."""

    _memo: dict = {}

    @classmethod
    def get(cls, table: EigenformTable):
        key = (table.weight, table.n_max, table.digest)
        if key not in cls._memo:
            cls._memo.clear()
            n = np.arange(table.n_max + 1, dtype=np.float64)
            n[0] = 1.0
            lam_s = table.lam / np.sqrt(n)
            logn = np.log(n)
            lam_s.setflags(write=False)
            logn.setflags(write=False)
            cls._memo[key] = (lam_s, logn)
        return cls._memo[key]


@njit(cache=True, nogil=True)
def _afe_batch(ds, dp_ptr, dp, lam_s, logn, rows, u0, hu, x_cut, out):
    """out[i] = sum over odd n of lam(n) chi_{8d}(n) n^{-1/2} V(2 pi n / 8d), Neumaier-compensated."""
    for i in range(len(ds)):
        d = ds[i]
        q8 = 8 * d
        chi = np.empty(q8, dtype=np.int8)
        fill_chi8d_table(d, dp[dp_ptr[i]:dp_ptr[i + 1]], chi)
        c = 2.0 * np.pi / q8
        logc = np.log(c)
        nmax = int(x_cut / c)
        s = 0.0
        comp = 0.0
        r = 1
        for n in range(1, nmax + 1, 2):
            ch = chi[r]
            r += 2
            if r >= q8:
                r -= q8
            if ch == 0:
                continue
            term = ch * lam_s[n] * hermite5(logn[n] + logc, u0, hu, rows)
            t = s + term
            if abs(s) >= abs(term):
                comp += (s - t) + term
            else:
                comp += (term - t) + s
            s = t
        out[i] = s + comp
    return out


def afe_sums(table: EigenformTable, kernel: AfeKernel, ds, workers: int = 1) -> np.ndarray:
    """sum_n lam(n) chi_{8d}(n) n^{-1/2} V(2 pi n/8d) for every d in ds.

    Every d is computed by the same sequential loop, so the output does not
    depend on how the d's are spread across worker threads.
    """
    ds = np.ascontiguousarray(ds, dtype=np.int64)
    if len(ds) == 0:
        return np.zeros(0)
    if kernel.weight != table.weight:
        raise DomainError(f"kernel weight {kernel.weight} != table weight {table.weight}")
    need = afe_length(kernel, int(ds.max()))
    if need > table.n_max:
        raise RangeError(f"AFE for d={int(ds.max())} needs lambda(n) up to {need}, "
                         f"table stops at {table.n_max}")
    factors = [prime_factors_trial(int(d)) for d in ds]
    dp_ptr = np.zeros(len(ds) + 1, dtype=np.int64)
    dp_ptr[1:] = np.cumsum([len(f) for f in factors])
    dp = np.array([p for f in factors for p in f], dtype=np.int64)
    lam_s, logn = _Scaled.get(table)
    rows = kernel.rows
    out = np.empty(len(ds))

    def run(lo):
        hi = min(lo + CHUNK, len(ds))
        _afe_batch(ds[lo:hi], dp_ptr[lo:hi + 1] - dp_ptr[lo], dp[dp_ptr[lo]:dp_ptr[hi]], lam_s, logn,
                   rows, kernel.u0, kernel.hu, kernel.x_cut, out[lo:hi])

    starts = range(0, len(ds), CHUNK)
    if workers <= 1:
        for lo in starts:
            run(lo)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return out


def central_value(table: EigenformTable, kernel: AfeKernel, d: int) -> float:
    """(1 + eps) sum lam(n) chi_{8d}(n) n^{-1/2} V_1(2 pi n / 8d).

    For weight = 0 mod 4 this is L(1/2, f x chi_{8d}); for weight = 2 mod 4
    the prefactor vanishes identically, as the odd functional equation forces.
    """
    if kernel.m != 1:
        raise DomainError("central values need an order-1 kernel")
    _check_d(d)
    return (1 + root_number(table.weight, 8 * d)) * float(afe_sums(table, kernel, [d])[0])


def central_value_trivial_twist(table: EigenformTable, kernel: AfeKernel) -> float:
    """The d = 1 case evaluated directly with chi_8(n) = (2|n), vectorised."""
    if kernel.m != 1:
        raise DomainError("central values need an order-1 kernel")
    nmax = afe_length(kernel, 1)
    if nmax > table.n_max:
        raise RangeError("table too short for d = 1")
    n = np.arange(1, nmax + 1, 2)
    chi = np.where((n % 8 == 1) | (n % 8 == 7), 1.0, -1.0)
    terms = table.lam[n] * chi / np.sqrt(n) * kernel_V(kernel, TWO_PI * n / 8.0)
    return (1 + root_number(table.weight, 8)) * math.fsum(terms)


def central_derivative(table: EigenformTable, kernel: AfeKernel, d: int) -> float:
    """L'(1/2, f x chi_{8d}) = 2 sum lam(n) chi_{8d}(n) n^{-1/2} V_2(2 pi n / 8d), weight = 2 mod 4."""
    if kernel.m != 2:
        raise DomainError("central derivatives need an order-2 kernel")
    if table.weight % 4 != 2:
        raise DomainError("central derivatives are defined here for weight = 2 mod 4 only")
    _check_d(d)
    return 2.0 * float(afe_sums(table, kernel, [d])[0])


# ---------------------------------------------------------------------------
# completed function


def gamma_factor(weight: int, d: int, s: float) -> float:
    """(8d / 2 pi)^s Gamma(s + (k-1)/2)."""
    return (8 * d / TWO_PI) ** s * gamma_fn(s + (weight - 1) / 2)


def completed_lambda(table: EigenformTable, s: float, d: int, split: float = 1.2) -> float:
    """Lambda(s, f x chi_{8d}) from the incomplete-gamma expansion.

        Lambda(s) = sum_n lam chi(n) [ (q/2 pi n)^s Gamma(s+a, x_n y) + eps (q/2 pi n)^{1-s} Gamma(1-s+a, x_n/y) ]

    with q = 8d, a = (k-1)/2, x_n = 2 pi n/q.  Any split y > 0 gives the
    same value, so y != 1 makes the functional equation a genuine check.
    """
    if not 0.0 < s < 1.0:
        raise DomainError("s must lie in (0, 1)")
    _check_d(d)
    a = (table.weight - 1) / 2
    q = 8 * d
    eps = root_number(table.weight, q)
    x_lim = 60.0 + 3.0 * a
    nmax = int(x_lim * max(split, 1 / split) * q / TWO_PI) + 1
    if nmax > table.n_max:
        raise RangeError(f"completed function for d={d} needs lambda(n) up to {nmax}")
    n = np.arange(1, nmax + 1, 2)
    chi = chi8d_table(d)[n % q].astype(np.float64)
    keep = chi != 0
    n, chi = n[keep], chi[keep]
    x = TWO_PI * n / q
    z1, z2 = s + a, 1 - s + a
    t1 = np.exp(-s * np.log(x) + gammaln(z1)) * gammaincc(z1, x * split)
    t2 = np.exp(-(1 - s) * np.log(x) + gammaln(z2)) * gammaincc(z2, x / split)
    return math.fsum(table.lam[n] * chi * (t1 + eps * t2))


def derivative_from_lambda(table: EigenformTable, d: int, h: float = 1e-3, split: float = 1.2) -> float:
    """L'(1/2) as a Richardson-extrapolated central difference of Lambda (valid when Lambda(1/2) = 0)."""
    def cd(step):
        return (completed_lambda(table, 0.5 + step, d, split)
                - completed_lambda(table, 0.5 - step, d, split)) / (2 * step)
    deriv = (4 * cd(h / 2) - cd(h)) / 3
    return deriv / gamma_factor(table.weight, d, 0.5)


# ---------------------------------------------------------------------------
# Euler factors and first-moment predictions


@dataclass(frozen=True)
class ZFactorInput:
    p: int
    gamma: float
    l: int
    lam_p: float

    @property
    def l1(self) -> int:
        return squarefree_decomposition(self.l)[0]

    @property
    def l2(self) -> int:
        return squarefree_decomposition(self.l)[1]


def _z_array(ps: np.ndarray, lam: np.ndarray, gamma: float, l1: int, l2: int) -> np.ndarray:
    """Vectorised Z_p(1/2 + gamma, l) over odd primes ps."""
    ps = np.asarray(ps, dtype=np.float64)
    u = ps ** -(0.5 + gamma)
    A = 1.0 / (1.0 - lam * u + u * u)
    B = 1.0 / (1.0 + lam * u + u * u)
    r = ps / (ps + 1.0)
    out = 1.0 + r * (0.5 * (A + B) - 1.0)
    pi = ps.astype(np.int64)
    in_l1 = (l1 % pi) == 0
    in_l2 = ((l2 % pi) == 0) & ~in_l1
    out[in_l2] = (r * 0.5 * (A + B))[in_l2]
    out[in_l1] = (ps ** (0.5 + gamma) * r * 0.5 * (A - B))[in_l1]
    return out


def z_factor(inp: ZFactorInput) -> float:
    """Z_p(1/2 + gamma, l): three cases by how p divides l = l1 l2^2."""
    if inp.p == 2:
        raise DomainError("Z_p is only defined for odd p")
    if inp.p < 2 or inp.l < 1 or inp.l % 2 == 0:
        raise DomainError("need an odd prime p and odd l >= 1")
    if abs(inp.gamma) >= 0.25:
        raise DomainError("|gamma| must be < 1/4")
    l1, l2 = squarefree_decomposition(inp.l)
    return float(_z_array(np.array([inp.p]), np.array([inp.lam_p]), inp.gamma, l1, l2)[0])


def _euler_product(table: EigenformTable, l: int, gamma: float, prime_cutoff: int) -> tuple[float, float]:
    """prod_{3 <= p <= cutoff} Z_p(1/2 + gamma, l) and its relative change from cutoff/10."""
    if prime_cutoff > table.n_max:
        raise RangeError(f"Euler cutoff {prime_cutoff} beyond table ({table.n_max})")
    l1, l2 = squarefree_decomposition(l)
    if any(p > prime_cutoff for p in prime_factors_trial(l)):
        raise DomainError("every prime factor of l must lie below the Euler cutoff")
    ps = primes_up_to(prime_cutoff)[1:]
    z = _z_array(ps, table.lam[ps], gamma, l1, l2)
    full = float(np.prod(z))
    part = float(np.prod(z[ps <= prime_cutoff // 10]))
    tail = abs(full / part - 1.0) if part != 0 else float("inf")
    return full, tail


def _check_l(l: int) -> None:
    if l < 1 or l % 2 == 0:
        raise DomainError(f"l must be a positive odd integer, got {l}")


def predicted_first_moment(table: EigenformTable, l: int, X: float,
                           prime_cutoff: int = 10**6) -> tuple[float, float]:
    """(1 + i^k) 4 Phi^(1) X / (pi^2 sqrt(l1)) prod_p Z_p(1/2, l), with the tail estimate."""
    _check_l(l)
    if table.weight % 4 != 0:
        raise DomainError("the untwisted-sign first moment needs weight = 0 mod 4")
    l1, _ = squarefree_decomposition(l)
    prod, tail = _euler_product(table, l, 0.0, prime_cutoff)
    value = 2 * 4 * mellin_phi(1).real * X / (math.pi**2 * math.sqrt(l1)) * prod
    return value, tail


def gamma_shift(weight: int, alpha: float) -> float:
    """(8/2 pi)^{-2 alpha} Gamma(k/2 - alpha) / Gamma(k/2 + alpha)."""
    return (8 / TWO_PI) ** (-2 * alpha) * math.exp(gammaln(weight / 2 - alpha) - gammaln(weight / 2 + alpha))


def shifted_moment(table: EigenformTable, l: int, X: float, alpha: float,
                   prime_cutoff: int = 10**6) -> float:
    """Main term of the shifted twisted moment M(alpha, l) at real alpha."""
    if abs(alpha) >= 0.25:
        raise DomainError("shift outside the region of absolute convergence")
    l1, _ = squarefree_decomposition(l)
    ik = 1 if table.weight % 4 == 0 else -1
    pa = _euler_product(table, l, alpha, prime_cutoff)[0]
    pb = _euler_product(table, l, -alpha, prime_cutoff)[0]
    a_term = 4 * X * mellin_phi(1).real / (math.pi**2 * l1 ** (0.5 + alpha)) * pa
    b_term = (4 * gamma_shift(table.weight, alpha) * X ** (1 - 2 * alpha)
              * mellin_phi(1 - 2 * alpha).real / (math.pi**2 * l1 ** (0.5 - alpha)) * pb)
    return a_term + ik * b_term


def predicted_first_moment_derivative(table: EigenformTable, l: int, X: float, h: float = 1e-3,
                                      prime_cutoff: int = 10**6) -> float:
    """d/d alpha of the shifted main term at alpha = 0 (central differences, Richardson h, h/2)."""
    _check_l(l)
    if table.weight % 4 != 2:
        raise DomainError("the derivative moment needs weight = 2 mod 4")
    if h == 0 or abs(h) > 1e-3:
        raise DomainError("need 0 < |h| <= 1e-3")

    def cd(step):
        return (shifted_moment(table, l, X, step, prime_cutoff)
                - shifted_moment(table, l, X, -step, prime_cutoff)) / (2 * step)
    return (4 * cd(h / 2) - cd(h)) / 3
