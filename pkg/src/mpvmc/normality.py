"""Shapiro-Wilk normality statistic and distribution summaries.

The W statistic uses Royston's polynomial approximation to the optimal
coefficients (valid for 3 <= n <= 5000): expected normal order statistics via
the Blom plotting position, with the top one or two coefficients corrected by
quintic polynomials in 1/sqrt(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateInputError

_TOP = (0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SECOND = (0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


def _poly(coefficients, u):
    return sum(c * u ** (k + 1) for k, c in enumerate(coefficients))


@dataclass(frozen=True)
class NormalityReport:
    w: float
    n: int
    standardized_moments: tuple  # (skewness, excess kurtosis)


def _sw_coefficients(n: int) -> np.ndarray:
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ss = float(m @ m)
    u = 1.0 / np.sqrt(n)
    a = np.empty(n)
    if n == 3:
        a[:] = (-np.sqrt(0.5), 0.0, np.sqrt(0.5))
        return a
    c = m / np.sqrt(ss)
    top = c[-1] + _poly(_TOP, u)
    if n <= 5:
        phi = (ss - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * top**2)
        a[1:-1] = m[1:-1] / np.sqrt(phi)
        a[-1] = top
        a[0] = -top
    else:
        second = c[-2] + _poly(_SECOND, u)
        phi = (ss - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * top**2 - 2.0 * second**2
        )
        a[2:-2] = m[2:-2] / np.sqrt(phi)
        a[-1], a[-2] = top, second
        a[0], a[1] = -top, -second
    return a


def shapiro_wilk(samples) -> NormalityReport:
    """Shapiro-Wilk W with standardized sample moments; 3 <= n <= 5000."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError(f"Shapiro-Wilk supports 3 <= n <= 5000, got {n}")
    if x[0] == x[-1]:
        raise DegenerateInputError("constant sample")
    a = _sw_coefficients(n)
    sse = float(((x - x.mean()) ** 2).sum())
    w = float((a @ x) ** 2 / sse)
    z = standardize(x)
    skewness = float((z**3).mean())
    kurtosis = float((z**4).mean() - 3.0)
    return NormalityReport(w, n, (skewness, kurtosis))


def standardize(samples) -> np.ndarray:
    """Affine transform of the sample to mean 0, (population) std 1."""
    x = np.asarray(samples, dtype=np.float64)
    std = float(x.std())
    if std == 0.0 or not np.isfinite(std):
        raise DegenerateInputError("constant or non-finite sample")
    return (x - x.mean()) / std
