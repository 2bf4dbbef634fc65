"""Scalar Gaussian helpers.

All functions accept scalars or numpy arrays and broadcast. Infinite
arguments are mapped to their limits so that open-ended quantization
intervals can be handled without special cases.
"""

import numpy as np
from scipy import special

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gaussian_ccdf(beta):
    """Upper tail probability of a standard normal, P(X > beta).

    Evaluated through the complementary error function, so tail values
    keep full relative precision (no ``1 - cdf`` cancellation).
    """
    out = special.ndtr(-np.asarray(beta, dtype=float))
    return out if np.ndim(out) else float(out)


def gaussian_ccdf_inv(p):
    """Inverse of :func:`gaussian_ccdf`.

    Raises
    ------
    ValueError
        If any ``p`` lies outside the open interval (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    beta = -special.ndtri(p)
    # Newton refinement on the ccdf; ndtri is already close so two steps suffice.
    for _ in range(2):
        resid = special.ndtr(-beta) - p
        beta = beta + resid / gaussian_pdf(beta)
    return beta if np.ndim(beta) else float(beta)


def gaussian_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if np.ndim(out) else float(out)


def omega(x):
    """``-x * gaussian_pdf(x)``, with the limit 0 at +-inf."""
    x = np.asarray(x, dtype=float)
    finite = np.isfinite(x)
    xf = np.where(finite, x, 0.0)
    out = np.where(finite, -xf * gaussian_pdf(xf), 0.0)
    return out if np.ndim(out) else float(out)


def x_pdf(x, scale=1.0):
    """``x * gaussian_pdf(x / scale)`` with the limit 0 at +-inf.

    This is the building block of the score terms, where thresholds
    appear multiplied by the density evaluated at the normalized threshold.
    """
    x = np.asarray(x, dtype=float)
    finite = np.isfinite(x)
    xf = np.where(finite, x, 0.0)
    out = np.where(finite, xf * gaussian_pdf(xf / scale), 0.0)
    return out if np.ndim(out) else float(out)


def noncentral_ccdf(beta, lam):
    """P(X > beta) for X ~ N(lam, 1)."""
    return gaussian_ccdf(np.asarray(beta, dtype=float) - lam)
