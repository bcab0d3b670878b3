"""Smoothed AFE weights V_m(x) and their tabulation.

    V_m(x) = (1/2 pi i) int_(c) Gamma(k/2 + s)/Gamma(k/2) G(s) x^{-s} ds / s^m

m = 1 feeds central values, m = 2 central derivatives.  Values are computed
by the trapezoidal rule on a vertical line (spectrally accurate for these
analytic integrands) and cached, together with their first two derivatives
in u = log x, on a uniform u-grid; lookups use quintic Hermite interpolation.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import digamma, gammaln, loggamma

from .errors import CacheFormatError, DomainError, NumericalError

MAGIC = b"QTVK"
FORMAT_VERSION = 2
_HEADER = struct.Struct("<4sIIIIdddQd")

CONTOUR = 1.5
INTEGRAND_FLOOR = 1e-18
KERNEL_FLOOR = 1e-12
STEP = 0.02
GRID_LO = 1e-9
GRID_HI = 200.0
GRID_STEP = 0.01


def _g_one(s):
    return np.ones_like(s)


def _g_cos(s):
    return np.cos(np.pi * s / 6.0)


# test functions: even, entire, G(0) = 1, real on the real axis
TEST_FUNCTIONS = {"one": (1, _g_one), "cos6": (2, _g_cos)}
_CODE_TO_NAME = {code: name for name, (code, _) in TEST_FUNCTIONS.items()}


def _tail_length(weight, m, g, sigma):
    """Smallest T with |integrand| * (1 + |s|^2) < INTEGRAND_FLOOR beyond it."""
    t = np.arange(0.0, 1000.0, 0.25)
    s = sigma + 1j * t
    mag = np.abs(np.exp(loggamma(weight / 2 + s) - gammaln(weight / 2)) * g(s) / s**m) * (1 + np.abs(s) ** 2)
    above = np.nonzero(mag >= INTEGRAND_FLOOR)[0]
    if len(above) == 0:
        return 1.0
    if above[-1] == len(t) - 1:
        raise NumericalError("kernel integrand does not decay on the contour",
                             {"weight": weight, "m": m, "sigma": sigma})
    return float(t[above[-1] + 1])


def _residues(weight, m, lx):
    """Residues at s = 0 of the three u-derivative integrands (orders 0, 1, 2)."""
    r = np.zeros((3, len(lx)))
    if m == 1:
        r[0] = 1.0
    else:
        r[0] = digamma(weight / 2) - lx
        r[1] = -1.0
    return r


def kernel_quadrature(weight: int, m: int, test_function: str, x, c: float = CONTOUR,
                      step: float = STEP, chunk: int = 256) -> np.ndarray:
    """V_m and its first two log-derivatives at each x, shape (3, len(x)).

    x >= 1 uses the line Re s = c; x < 1 uses Re s = -c plus the residue at
    s = 0, which avoids the x^{-c} cancellation for small x.
    """
    if m not in (1, 2):
        raise DomainError("kernel order must be 1 or 2")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x <= 0):
        raise DomainError("kernel argument must be positive")
    g = TEST_FUNCTIONS[test_function][1]
    out = np.empty((3, len(x)))
    for sigma, sel in ((c, x >= 1.0), (-c, x < 1.0)):
        idx = np.nonzero(sel)[0]
        if len(idx) == 0:
            continue
        T = _tail_length(weight, m, g, sigma)
        t = np.arange(0.0, T + step, step)
        s = sigma + 1j * t
        w = np.full(len(t), step)
        w[0] = step / 2
        base = np.exp(loggamma(weight / 2 + s) - gammaln(weight / 2)) * g(s) / s**m * w
        vecs = np.stack([base, base * (-s), base * s * s], axis=1)
        for lo in range(0, len(idx), chunk):
            part = idx[lo:lo + chunk]
            lx = np.log(x[part])
            E = np.exp(-1j * np.outer(lx, t))
            vals = (E @ vecs).real.T * (np.exp(-sigma * lx) / np.pi)
            if sigma < 0:
                vals += _residues(weight, m, lx)
            out[:, part] = vals
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite kernel value", {"weight": weight, "m": m})
    return out


@dataclass(frozen=True)
class AfeKernel:
    """Tabulated V_m on u = log x in [u0, u0 + (K-1) hu]; table[:, j] = (V, V_u, V_uu)."""

    weight: int
    m: int
    test_function: str
    c: float
    u0: float
    hu: float
    table: np.ndarray
    x_cut: float

    @property
    def x_min(self) -> float:
        return math.exp(self.u0)

    @property
    def x_max(self) -> float:
        return math.exp(self.u0 + (self.table.shape[1] - 1) * self.hu)

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<III", self.weight, self.m, TEST_FUNCTIONS[self.test_function][0]))
        h.update(np.ascontiguousarray(self.table).tobytes())
        return h.hexdigest()

    @property
    def rows(self) -> np.ndarray:
        """Table transposed to (K, 3), the layout the compiled kernels read."""
        return np.ascontiguousarray(self.table.T)

    def __call__(self, x):
        return kernel_V(self, x)


def build_kernel(weight: int, m: int, test_function: str = "one", c: float = CONTOUR,
                 lo: float = GRID_LO, hi: float = GRID_HI, hu: float = GRID_STEP) -> AfeKernel:
    """Tabulate V_m and fix x_cut: |V_m| < 1e-12 on every grid point beyond it."""
    if weight % 2:
        raise DomainError("weight must be even")
    u0 = math.log(lo)
    K = int(math.ceil((math.log(hi) - u0) / hu)) + 1
    u = u0 + hu * np.arange(K)
    table = kernel_quadrature(weight, m, test_function, np.exp(u), c=c)
    big = np.nonzero(np.abs(table[0]) >= KERNEL_FLOOR)[0]
    if big[-1] >= K - 2:
        raise NumericalError("kernel does not fall below 1e-12 inside the tabulated range",
                             {"weight": weight, "m": m, "x_max": float(np.exp(u[-1]))})
    x_cut = float(np.exp(u[big[-1] + 1]))
    return AfeKernel(weight, m, test_function, c, u0, hu, table, x_cut)


@njit(cache=True, nogil=True, inline="always")
def hermite5(u, u0, hu, rows):
    """Quintic Hermite interpolation of a (K, 3) value/derivative table at u."""
    z = (u - u0) / hu
    j = int(z)
    K = rows.shape[0]
    if j < 0:
        j = 0
    if j > K - 2:
        j = K - 2
    t = z - j
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
    h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h5 = 0.5 * (t3 - 2.0 * t4 + t5)
    return (rows[j, 0] * h0 + hu * rows[j, 1] * h1 + hu * hu * rows[j, 2] * h2
            + rows[j + 1, 0] * h3 + hu * rows[j + 1, 1] * h4 + hu * hu * rows[j + 1, 2] * h5)


@njit(cache=True)
def _hermite_many(u, u0, hu, rows, out):
    for i in range(len(u)):
        out[i] = hermite5(u[i], u0, hu, rows)
    return out


def kernel_V(kernel: AfeKernel, x):
    """V_m(x): table lookup inside the grid, direct quadrature outside it."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x <= 0):
        raise DomainError("kernel argument must be positive")
    out = np.empty(len(x))
    inside = (x >= kernel.x_min) & (x <= kernel.x_max)
    if np.any(inside):
        out[inside] = _hermite_many(np.log(x[inside]), kernel.u0, kernel.hu, kernel.rows,
                                    np.empty(int(inside.sum())))
    if np.any(~inside):
        out[~inside] = kernel_quadrature(kernel.weight, kernel.m, kernel.test_function,
                                         x[~inside], c=kernel.c)[0]
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# cache file


def write_kernel(kernel: AfeKernel, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    code = TEST_FUNCTIONS[kernel.test_function][0]
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, kernel.weight, kernel.m, code, kernel.c,
                              kernel.u0, kernel.hu, kernel.table.shape[1], kernel.x_cut))
        body = np.ascontiguousarray(kernel.table, dtype="<f8").tobytes()
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())
    tmp.replace(path)


def read_kernel(path) -> AfeKernel:
    path = Path(path)
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CacheFormatError(f"{path}: truncated header")
    magic, version, weight, m, code, c, u0, hu, K, x_cut = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION or code not in _CODE_TO_NAME:
        raise CacheFormatError(f"{path}: unsupported version/test function")
    body, check = data[_HEADER.size:-32], data[-32:]
    if len(body) != 24 * K:
        raise CacheFormatError(f"{path}: truncated body")
    if hashlib.sha256(body).digest() != check:
        raise CacheFormatError(f"{path}: body checksum mismatch")
    table = np.frombuffer(body, dtype="<f8").reshape(3, K).copy()
    return AfeKernel(weight, m, _CODE_TO_NAME[code], c, u0, hu, table, x_cut)
