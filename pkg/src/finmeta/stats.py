"""Shared statistical kernels: normal distribution, BH adjustment, KS distance.

Everything here is vectorized over numpy arrays and accepts scalars, which
makes the combining layer a handful of array expressions instead of per-gene
loops.
"""

from __future__ import annotations

import numpy as np
from scipy import special

__all__ = [
    "std_normal_cdf",
    "std_normal_upper_tail",
    "std_normal_quantile",
    "bh_adjust",
    "ks_uniform_stat",
]

# Raw p-values are clamped into this closed range before transformation so the
# quantile stays finite; values at or below zero are a caller error, not data.
P_MIN = 1e-300
P_MAX = 1.0 - 1e-16


def std_normal_cdf(x):
    """Standard normal CDF Phi(x), vectorized.

    Parameters
    ----------
    x : array_like
        Real values (``+/-inf`` allowed).

    Returns
    -------
    ndarray or float
        ``Phi(x)`` with absolute error below 1e-12.
    """
    return special.ndtr(x)


def std_normal_upper_tail(x):
    """Upper tail probability ``1 - Phi(x)`` without cancellation.

    Computed as ``Phi(-x)``, which keeps full relative accuracy deep into the
    tail (down to ~1e-308 near x = 37) instead of rounding to 0 at x ~ 8 the
    way ``1 - Phi(x)`` would.
    """
    return special.ndtr(np.negative(x))


def std_normal_quantile(p):
    """Standard normal quantile Phi^{-1}(p) for p strictly inside (0, 1).

    Parameters
    ----------
    p : array_like
        Probabilities, each in the open interval (0, 1).

    Returns
    -------
    ndarray or float
        Quantiles; ``std_normal_cdf`` of the result round-trips to ``p``.

    Raises
    ------
    ValueError
        If any value is outside (0, 1) or not finite.
    """
    arr = np.asarray(p, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0)):
        raise ValueError("quantile requires probabilities strictly inside (0, 1)")
    return special.ndtri(arr)


def clamp_p_values(p):
    """Validate raw p-values against [0, 1] and clamp into ``[P_MIN, P_MAX]``.

    Exact zeros and ones are legal inputs (discrete tests produce them) and
    are pulled just inside the open interval so the quantile stays finite.
    """
    arr = np.asarray(p, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0)):
        raise ValueError("p-values must lie in [0, 1]; got values outside that range")
    return np.clip(arr, P_MIN, P_MAX)


def bh_adjust(p_values):
    """Benjamini-Hochberg adjusted p-values, preserving input order.

    Parameters
    ----------
    p_values : array_like
        Raw p-values in [0, 1].

    Returns
    -------
    ndarray
        Adjusted values: sort ascending, take ``m * p / rank``, cumulative
        minimum from the largest rank down, undo the sort, cap at 1. Ties in
        the input receive identical adjusted values, and the adjusted vector
        is monotone in the raw one.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"expected a 1-d vector of p-values, got shape {p.shape}")
    if p.size == 0:
        return p.copy()
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = m * p[order] / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty_like(p)
    out[order] = np.minimum(adjusted, 1.0)
    return out


def ks_uniform_stat(values):
    """Two-sided Kolmogorov-Smirnov distance from the Uniform(0, 1) CDF.

    ``sup_t |F_hat(t) - t|`` over the empirical CDF. To measure distance from
    any other continuous distribution, push the sample through that CDF first
    (probability integral transform) and call this on the result.
    """
    u = np.sort(np.asarray(values, dtype=float))
    if u.size == 0:
        raise ValueError("KS statistic needs at least one observation")
    if u[0] < 0.0 or u[-1] > 1.0 or not np.all(np.isfinite(u)):
        raise ValueError("values must lie in [0, 1]")
    n = u.size
    grid = np.arange(1, n + 1) / n
    return float(np.maximum(grid - u, u - (grid - 1.0 / n)).max())
