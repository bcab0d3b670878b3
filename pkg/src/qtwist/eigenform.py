"""Hecke eigenvalues of the level-1 cusp eigenforms of weight 12, 16, 18, 20, 22, 26.

The q-expansions are built exactly: Delta = q prod (1 - q^n)^24 comes from
Jacobi's sparse series for prod (1 - q^n)^3, E4 and E6 from divisor sums, and
every power-series product is a single big-integer multiplication (Kronecker
substitution with a fixed slot width), and the normalised eigenvalues are
produced only at the very end.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import gmpy2
import numpy as np
from numba import njit

from .arithmetic import DEFAULT_MEMORY_CAP, factorize, primes_up_to, spf_sieve
from .errors import CacheFormatError, ConfigurationError, DomainError, RangeError, ResourceError

# weight -> exponents (a, b) with f = Delta * E4^a * E6^b
WEIGHTS = {12: (0, 0), 16: (1, 0), 18: (0, 1), 20: (2, 0), 22: (1, 1), 26: (2, 1)}

MAGIC = b"QTMF"
FORMAT_VERSION = 2
_HEADER = struct.Struct("<4sIIQ")


@dataclass(frozen=True)
class EigenformTable:
    """lam[n] = lambda_f(n) for 1 <= n <= n_max (lam[0] is unused and 0)."""

    weight: int
    n_max: int
    lam: np.ndarray
    digest: bytes

    def __post_init__(self):
        self.lam.setflags(write=False)

    def __getitem__(self, n):
        return self.lam[n]

    @property
    def hex_digest(self) -> str:
        return self.digest.hex()


# ---------------------------------------------------------------------------
# exact series


@njit(cache=True)
def _sigma_limbs(n_max, k):
    """sigma_k(m) for m <= n_max as (lo, hi) uint64 limbs; needs sigma_k < 2**128."""
    lo = np.zeros(n_max + 1, dtype=np.uint64)
    hi = np.zeros(n_max + 1, dtype=np.uint64)
    mask32 = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for d in range(1, n_max + 1):
        # d**k as a two-limb integer; every multiplier d < 2**32
        plo = np.uint64(1)
        phi = np.uint64(0)
        m = np.uint64(d)
        for _ in range(k):
            a = (plo & mask32) * m
            b = (plo >> s32) * m
            t = a + ((b & mask32) << s32)
            carry = np.uint64(1) if t < a else np.uint64(0)
            plo = t
            phi = phi * m + (b >> s32) + carry
        for j in range(d, n_max + 1, d):
            t = lo[j] + plo
            carry = np.uint64(1) if t < plo else np.uint64(0)
            lo[j] = t
            hi[j] = hi[j] + phi + carry
    return lo, hi


class _Packer:
    """Power series truncated at q^n_max, stored as one integer sum c_i * 2**(bits*i)."""

    def __init__(self, n_max: int, slot_bytes: int):
        self.n = n_max
        self.w = slot_bytes
        self.bits = 8 * slot_bytes
        self.total = self.bits * (n_max + 1)
        self.modulus = gmpy2.mpz(1) << self.total
        self.half = gmpy2.mpz(1) << (self.total - 1)

    def pack_limbs(self, lo: np.ndarray, hi: np.ndarray):
        # gmpy2 binary layout: type byte, sign byte, little-endian magnitude
        buf = np.zeros(2 + (self.n + 1) * self.w, dtype=np.uint8)
        buf[0] = buf[1] = 1
        slots = buf[2:].reshape(self.n + 1, self.w)
        slots[:, 0:8] = lo.view(np.uint8).reshape(-1, 8)
        slots[:, 8:16] = hi.view(np.uint8).reshape(-1, 8)
        del slots
        raw = buf.tobytes()
        del buf
        return gmpy2.from_binary(raw)

    def truncate(self, x):
        r = gmpy2.f_mod_2exp(x, self.total)
        if r >= self.half:
            r -= self.modulus
        return r

    def mul(self, a, b):
        return self.truncate(a * a if a is b else a * b)

    def _unsigned_view(self, x) -> memoryview:
        # the extra top bit pins the magnitude length to total // 8 + 1 bytes
        r = gmpy2.f_mod_2exp(x, self.total) + self.modulus
        return memoryview(gmpy2.to_binary(r))[2:2 + self.total // 8]

    def coefficients(self, x):
        """Yield the signed slot coefficients c_0..c_n."""
        return self.decode(self._unsigned_view(x))

    def decode(self, raw: memoryview):
        w = self.w
        borrow = 0
        for i in range(self.n + 1):
            v = int.from_bytes(raw[i * w:(i + 1) * w], "little", signed=True)
            yield v + borrow
            borrow = 1 if v < 0 else 0

    def raw_bytes(self, x) -> memoryview:
        return self._unsigned_view(x)


def _jacobi_cube_bound(n_max: int) -> tuple[int, int]:
    """Bounds on the coefficients of J^2 and J^4, J = prod (1 - q^n)^3."""
    r = math.isqrt(2 * n_max) + 2
    c2 = r * (2 * r + 1) ** 2
    return c2, (n_max + 1) * c2 * c2


def _deligne_bound(weight: int, n_max: int) -> int:
    """|a(n)| <= d(n) n^{(k-1)/2} <= 2 sqrt(n) n^{(k-1)/2} for n <= n_max."""
    r = math.isqrt(n_max) + 1
    return 2 * r ** weight


def _slot_bytes(weight: int, n_max: int) -> int:
    """Slot width bounding every intermediate coefficient in the build.

    Delta = q J^8 and every partial product Delta E4^i E6^j in the chain is
    itself an eigenform, so Deligne's bound covers all of them.
    """
    a, b = WEIGHTS[weight]
    bounds = list(_jacobi_cube_bound(n_max))
    w = 12
    bounds.append(_deligne_bound(w, n_max))
    for step in [4] * a + [6] * b:
        w += step
        bounds.append(_deligne_bound(w, n_max))
    if a:
        bounds.append(1 + 240 * (121 * n_max**3 // 100 + 1))
    if b:
        bounds.append(1 + 504 * (104 * n_max**5 // 100 + 1))
    bits = max(x.bit_length() for x in bounds) + 2
    return max(16, (bits + 7) // 8)


def estimated_generation_bytes(weight: int, n_max: int) -> int:
    """Rough peak memory of a build: about eight live series images."""
    return 8 * _slot_bytes(weight, n_max) * (n_max + 1)


def _jacobi_cube(pk: "_Packer"):
    """J = prod (1 - q^n)^3 = sum_k (-1)^k (2k+1) q^{k(k+1)/2}, packed."""
    pos = np.zeros(pk.n + 1, dtype=np.uint64)
    neg = np.zeros(pk.n + 1, dtype=np.uint64)
    k = 0
    while k * (k + 1) // 2 <= pk.n:
        (neg if k % 2 else pos)[k * (k + 1) // 2] = 2 * k + 1
        k += 1
    zero = np.zeros(pk.n + 1, dtype=np.uint64)
    return pk.pack_limbs(pos, zero) - pk.pack_limbs(neg, zero)


def _eisenstein(pk: "_Packer", k: int, c: int):
    lo, hi = _sigma_limbs(pk.n, k)
    lo[0] = hi[0] = 0
    s = pk.pack_limbs(lo, hi)
    del lo, hi
    return 1 + c * s


def _series_coefficients(weight: int, n_max: int, memory_cap: int):
    """Exact q-expansion coefficients a(0..n_max), packed."""
    if weight not in WEIGHTS:
        raise ConfigurationError(f"unsupported weight {weight}; choose one of {sorted(WEIGHTS)}")
    need = estimated_generation_bytes(weight, n_max)
    if need > memory_cap:
        raise ResourceError(f"series of length {n_max} at weight {weight} needs ~{need} bytes "
                            f"(cap {memory_cap})")
    pk = _Packer(n_max, _slot_bytes(weight, n_max))
    f = _jacobi_cube(pk)
    for _ in range(3):
        f = pk.mul(f, f)
    f = pk.truncate(f << pk.bits)
    a, b = WEIGHTS[weight]
    if a:
        e4 = _eisenstein(pk, 3, 240)
        for _ in range(a):
            f = pk.mul(f, e4)
        del e4
    if b:
        f = pk.mul(f, _eisenstein(pk, 5, -504))
    return pk, f


def _normalise(a: int, n: int, e: int) -> float:
    """a / n**(e/2) correctly rounded to double (e odd)."""
    if a == 0:
        return 0.0
    shift = max(0, 70 + (e * n.bit_length()) // 2 - a.bit_length())
    num = (a * a) << (2 * shift)
    den = n**e
    y, r = divmod(num, den)
    m = math.isqrt(y)
    if r or m * m != y:
        m |= 1
    val = math.ldexp(float(m), -shift)
    return val if a > 0 else -val


def exact_coefficients(weight: int, n_max: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> list[int]:
    """a(1..n_max) as Python integers (index 0 holds a(0) = 0)."""
    pk, f = _series_coefficients(weight, n_max, memory_cap)
    return list(pk.coefficients(f))


def generate_eigenform(weight: int, n_max: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> EigenformTable:
    """Normalised Hecke eigenvalues lambda_f(n) = a(n) n^{-(k-1)/2}, n <= n_max."""
    if weight not in WEIGHTS:
        raise ConfigurationError(f"unsupported weight {weight}; choose one of {sorted(WEIGHTS)}")
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    pk, f = _series_coefficients(weight, n_max, memory_cap)
    h = hashlib.sha256()
    h.update(struct.pack("<IQI", weight, n_max, pk.w))
    raw = pk.raw_bytes(f)
    del f
    h.update(raw)
    lam = np.zeros(n_max + 1, dtype=np.float64)
    e = weight - 1
    it = pk.decode(raw)
    if next(it) != 0:
        raise ArithmeticError("cusp form with nonzero constant term")
    for n, a in enumerate(it, start=1):
        lam[n] = _normalise(a, n, e)
    if lam[1] != 1.0:
        raise ArithmeticError("series is not normalised: a(1) != 1")
    return EigenformTable(weight, n_max, lam, h.digest())


def hecke_from_primes(ap: dict[int, int], weight: int, n_max: int) -> list[int]:
    """Rebuild a(n), n <= n_max, from a(p) via the Hecke recurrence and multiplicativity."""
    spf = spf_sieve(n_max)
    e = weight - 1
    out = [0, 1] + [0] * (n_max - 1)
    for n in range(2, n_max + 1):
        fac = factorize(n, spf)
        p, k = fac[0]
        pk = p**k
        rest = n // pk
        if rest > 1:
            out[n] = out[pk] * out[rest]
        elif k == 1:
            out[n] = ap[p]
        else:
            out[n] = ap[p] * out[pk // p] - p**e * out[pk // (p * p)]
    return out


# ---------------------------------------------------------------------------
# derived quantities


def lambda_tilde(table: EigenformTable, n: int, spf: np.ndarray | None = None) -> float:
    """Completely multiplicative extension: prod lambda_f(p)^a over p^a || n."""
    if n < 1:
        raise DomainError("n must be positive")
    if spf is None:
        spf = spf_sieve(n)
    out = 1.0
    for p, a in factorize(n, spf):
        if p > table.n_max:
            raise RangeError(f"prime {p} outside eigenvalue table (n_max={table.n_max})")
        out *= float(table.lam[p]) ** a
    return out


def sym_square_euler_factor(lam_p, p):
    """[(1 - a^2/p)(1 - 1/p)(1 - b^2/p)]^{-1} with a + b = lam_p, ab = 1."""
    p = np.asarray(p, dtype=np.float64)
    inv = 1.0 / p
    return 1.0 / ((1.0 - (np.asarray(lam_p) ** 2 - 2.0) * inv + inv * inv) * (1.0 - inv))


def sym_square_L1(table: EigenformTable, prime_cutoff: int) -> tuple[float, float]:
    """Truncated Euler product for L(1, sym^2 f) and its relative tail change.

    The tail estimate is |value(cutoff) / value(cutoff // 10) - 1|.
    """
    if prime_cutoff < 1000:
        raise DomainError("prime_cutoff must be >= 1000")
    if prime_cutoff > table.n_max:
        raise RangeError(f"cutoff {prime_cutoff} beyond table n_max={table.n_max}")
    ps = primes_up_to(prime_cutoff)
    logs = np.log(sym_square_euler_factor(table.lam[ps], ps))
    full = math.exp(math.fsum(logs))
    short = math.exp(math.fsum(logs[ps <= prime_cutoff // 10]))
    return full, abs(full / short - 1.0)


# ---------------------------------------------------------------------------
# cache file


def write_table(table: EigenformTable, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, table.weight, table.n_max))
        body = np.ascontiguousarray(table.lam[1:], dtype="<f8").tobytes()
        fh.write(body)
        fh.write(table.digest)
        fh.write(hashlib.sha256(body).digest())
    tmp.replace(path)


def read_table(path) -> EigenformTable:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise CacheFormatError(f"{path}: truncated header")
        magic, version, weight, n_max = _HEADER.unpack(head)
        if magic != MAGIC:
            raise CacheFormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise CacheFormatError(f"{path}: unsupported version {version}")
        body = fh.read(8 * n_max)
        digest = fh.read(32)
        check = fh.read(32)
    if len(body) != 8 * n_max or len(digest) != 32 or len(check) != 32:
        raise CacheFormatError(f"{path}: truncated body")
    if hashlib.sha256(body).digest() != check:
        raise CacheFormatError(f"{path}: body checksum mismatch")
    lam = np.zeros(n_max + 1, dtype=np.float64)
    lam[1:] = np.frombuffer(body, dtype="<f8")
    return EigenformTable(weight, n_max, lam, digest)
