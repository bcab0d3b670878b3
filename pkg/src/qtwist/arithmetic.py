"""Number-theoretic kernels: Kronecker symbols, sieves and small multiplicative functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .errors import DomainError, RangeError, ResourceError

DEFAULT_MEMORY_CAP = 4 * 1024**3


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a|n) for arbitrary integers, not both zero.

    Binary algorithm: strip powers of two from n with the (a|2) supplement,
    handle the sign of n, then run the Jacobi reciprocity loop.
    """
    a = int(a)
    n = int(n)
    if n == 0:
        return 1 if abs(a) == 1 else 0
    if a % 2 == 0 and n % 2 == 0:
        return 0
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    k = 1
    if v % 2 == 1 and a % 8 in (3, 5):
        k = -k
    if n < 0:
        n = -n
        if a < 0:
            k = -k
    a %= n
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                k = -k
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            k = -k
        a %= n
    return k if n == 1 else 0


def primes_up_to(n: int) -> np.ndarray:
    """All primes <= n as an int64 array."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(n) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.nonzero(sieve)[0].astype(np.int64)


def spf_sieve(n: int) -> np.ndarray:
    """Smallest-prime-factor table; spf[0] = 0, spf[1] = 1."""
    spf = np.zeros(n + 1, dtype=np.int32)
    if n >= 1:
        spf[1] = 1
    spf[2::2] = 2
    for p in range(3, math.isqrt(n) + 1, 2):
        if spf[p] == 0:
            block = spf[p * p :: 2 * p]
            block[block == 0] = p
    rest = spf == 0
    rest[0] = False
    spf[rest] = np.nonzero(rest)[0]
    return spf


def odd_squarefree_mask(X: int) -> np.ndarray:
    """mask[d] is True iff 0 < d < X, d odd and square-free."""
    mask = np.zeros(X, dtype=bool)
    mask[1::2] = True
    for p in primes_up_to(math.isqrt(max(X - 1, 1))):
        p = int(p)
        if p == 2:
            continue
        mask[p * p :: p * p] = False
    return mask


@dataclass(frozen=True)
class FamilyIndex:
    """Odd square-free family members d in (0, X) plus prime/spf tables."""

    X: int
    odd_squarefree: np.ndarray
    spf: np.ndarray
    primes: np.ndarray
    bound: int = field(default=0)

    @property
    def count(self) -> int:
        return int(self.odd_squarefree.sum())

    def members(self, lo: float = 0, hi: float | None = None) -> np.ndarray:
        """Family members d with lo < d < hi."""
        hi = self.X if hi is None else hi
        d = np.nonzero(self.odd_squarefree)[0]
        return d[(d > lo) & (d < hi)].astype(np.int64)

    def dump(self, path) -> None:
        np.savetxt(path, self.members(), fmt="%d")


def build_family_index(X: int, spf_bound: int | None = None,
                       memory_cap: int = DEFAULT_MEMORY_CAP) -> FamilyIndex:
    """Sieve the odd square-free d < X and an spf table up to ``spf_bound``.

    The spf bound is independent of X since the AFE sums run far past X.
    """
    if X < 16:
        raise DomainError(f"family bound X must be >= 16, got {X}")
    bound = max(int(spf_bound or X), X)
    need = X + 4 * (bound + 1) + 8 * bound // 10
    if need > memory_cap:
        raise ResourceError(f"family index needs ~{need} bytes, cap is {memory_cap}")
    return FamilyIndex(X=X, odd_squarefree=odd_squarefree_mask(X), spf=spf_sieve(bound),
                       primes=primes_up_to(bound), bound=bound)


def factorize(n: int, spf: np.ndarray) -> list[tuple[int, int]]:
    """Prime factorization of n through the spf table."""
    if n < 1:
        raise DomainError("factorize needs n >= 1")
    if n >= len(spf):
        raise RangeError(f"{n} outside spf range {len(spf) - 1}")
    out: list[tuple[int, int]] = []
    while n > 1:
        p = int(spf[n])
        a = 0
        while n % p == 0:
            n //= p
            a += 1
        out.append((p, a))
    return out


def omega_big(n: int, spf: np.ndarray) -> int:
    """Number of prime factors counted with multiplicity."""
    return sum(a for _, a in factorize(n, spf))


def w_multiplicative(n: int, spf: np.ndarray) -> int:
    """w(n) = prod a_i! over n = prod p_i^a_i."""
    out = 1
    for _, a in factorize(n, spf):
        out *= math.factorial(a)
    return out


def is_square(n: int) -> bool:
    if n < 0:
        return False
    r = math.isqrt(n)
    return r * r == n


def squarefree_decomposition(l: int) -> tuple[int, int]:
    """Write l = l1 * l2**2 with l1 square-free (trial division)."""
    if l < 1:
        raise DomainError("need l >= 1")
    l1, l2 = 1, 1
    m = l
    p = 2
    while p * p <= m:
        a = 0
        while m % p == 0:
            m //= p
            a += 1
        if a:
            l2 *= p ** (a // 2)
            if a % 2:
                l1 *= p
        p += 1
    l1 *= m
    return l1, l2


def chi8d_on_primes(d: int, primes: Iterable[int]) -> np.ndarray:
    """chi_{8d}(p) = (8d | p) for every listed prime."""
    return np.array([kronecker(8 * d, int(p)) for p in primes], dtype=np.int8)


def chi8d_multiplicative(d: int, n: int, spf: np.ndarray, cache: dict | None = None) -> int:
    """chi_{8d}(n) rebuilt from its values on primes (complete multiplicativity)."""
    out = 1
    for p, a in factorize(n, spf):
        if cache is not None and p in cache:
            c = cache[p]
        else:
            c = kronecker(8 * d, p)
            if cache is not None:
                cache[p] = c
        if c == 0:
            return 0
        if c < 0 and a % 2:
            out = -out
    return out


@njit(cache=True, nogil=True)
def fill_chi8d_table(d, dprimes, out):
    """Fill out[r] = chi_{8d}(r) for 0 <= r < 8d (d odd, square-free, > 0).

    chi_{8d} is a character mod 8d: for odd r it equals (2|r) times the
    Jacobi symbol (d|r) = (r|d) (-1)^((d-1)/2 (r-1)/2), and (r|d) is the
    product of Legendre symbols over the prime factors of d.
    """
    q8 = 8 * d
    jac = np.ones(d, dtype=np.int8)
    for q in dprimes:
        leg = -np.ones(q, dtype=np.int8)
        leg[0] = 0
        for x in range(1, (q + 1) // 2):
            leg[(x * x) % q] = 1
        for r in range(d):
            jac[r] *= leg[r % q]
    dodd = (d - 1) // 2 % 2
    for r in range(q8):
        if r % 2 == 0:
            out[r] = 0
            continue
        s = 1
        m8 = r % 8
        if m8 == 3 or m8 == 5:
            s = -s
        if dodd == 1 and r % 4 == 3:
            s = -s
        out[r] = s * jac[r % d]
    return out


def chi8d_table(d: int) -> np.ndarray:
    """Residue table of chi_{8d} modulo 8d."""
    dprimes = np.array(prime_factors_trial(d), dtype=np.int64)
    return fill_chi8d_table(d, dprimes, np.empty(8 * d, dtype=np.int8))


def prime_factors_trial(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def divisor_count(n: int, spf: np.ndarray) -> int:
    out = 1
    for _, a in factorize(n, spf):
        out *= a + 1
    return out


def divisor_count_table(n: int) -> np.ndarray:
    """d(m) for 0 <= m <= n (d(0) = 0)."""
    out = np.zeros(n + 1, dtype=np.int64)
    for k in range(1, n + 1):
        out[k::k] += 1
    return out


def jacobi_array(a, n) -> np.ndarray:
    """Elementwise Jacobi symbol (a|n) for odd positive n (numpy, reciprocity loop)."""
    a = np.array(a, dtype=np.int64) % np.asarray(n, dtype=np.int64)
    n = np.array(n, dtype=np.int64)
    a, n = np.broadcast_arrays(a, n)
    a, n = a.copy(), n.copy()
    if np.any((n <= 0) | (n % 2 == 0)):
        raise DomainError("Jacobi symbol needs odd positive n")
    t = np.ones(a.shape, dtype=np.int64)
    live = a != 0
    while np.any(live):
        ev = live & (a % 2 == 0)
        while np.any(ev):
            a[ev] //= 2
            flip = ev & ((n % 8 == 3) | (n % 8 == 5))
            t[flip] = -t[flip]
            ev = live & (a % 2 == 0)
        sw = live
        a[sw], n[sw] = n[sw], a[sw].copy()
        flip = sw & (a % 4 == 3) & (n % 4 == 3)
        t[flip] = -t[flip]
        a[sw] %= n[sw]
        live = a != 0
    return np.where(n == 1, t, 0)
