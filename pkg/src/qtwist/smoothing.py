"""The smooth weight Phi (support [1/8, 7/8], plateau [1/4, 3/4]) and its Mellin transform."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalError

SUPPORT = (0.125, 0.875)
PLATEAU = (0.25, 0.75)
RAMP = 0.125


def _smooth_step(t):
    """exp(-1/t) / (exp(-1/t) + exp(-1/(1-t))) on 0 < t < 1; 0 below, 1 above."""
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inside = (t > 0.0) & (t < 1.0)
    if np.any(inside):
        ti = t[inside]
        a = np.exp(-1.0 / ti)
        b = np.exp(-1.0 / (1.0 - ti))
        out[inside] = a / (a + b)
    return out


def phi_eval(x):
    """Phi(x); accepts scalars or arrays."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    rise = _smooth_step((x - SUPPORT[0]) / RAMP)
    fall = _smooth_step((SUPPORT[1] - x) / RAMP)
    out = np.minimum(rise, fall)
    return float(out[0]) if scalar else out


def _plateau_mellin(s: complex) -> complex:
    if abs(s) < 1e-14:
        return math.log(3.0)
    return (0.75**s - 0.25**s) / s


def mellin_phi(s: complex, epsabs: float = 1e-13, limit: int = 200) -> complex:
    """int_0^inf Phi(x) x^{s-1} dx by adaptive quadrature on the two ramps.

    The plateau contributes in closed form; each ramp is integrated with
    QUADPACK and the summed error estimate must stay below 1e-12.
    """
    s = complex(s)
    total = _plateau_mellin(s)
    err = 0.0
    for lo, hi in ((SUPPORT[0], PLATEAU[0]), (PLATEAU[1], SUPPORT[1])):
        for part in (np.real, np.imag):
            f = lambda x, part=part: float(part(phi_eval(x) * x ** (s - 1.0)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, e, info = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=0.0,
                                              limit=limit, full_output=True)[:3]
            err += e
            total += val if part is np.real else 1j * val
    if err > 1e-12:
        raise NumericalError(f"Mellin quadrature did not reach 1e-12 at s={s}",
                             {"s": s, "error_estimate": err, "limit": limit})
    return total


def mellin_phi_gauss(s: complex, nodes: int = 160) -> complex:
    """Same transform by fixed Gauss-Legendre rules on each ramp (cross-check rule)."""
    s = complex(s)
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = _plateau_mellin(s)
    for lo, hi in ((SUPPORT[0], PLATEAU[0]), (PLATEAU[1], SUPPORT[1])):
        xm = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.sum(w * phi_eval(xm) * xm ** (s - 1.0))
    return complex(total)
