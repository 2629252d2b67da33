"""Small dense kernels shared by the smoother, the receivers and the oracles."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NotPositiveDefinite

# log I0 switches from the power series to the asymptotic expansion here
BESSEL_CROSSOVER = 20.0
_ASYMPTOTIC_TERMS = 14


def _cholesky(a: np.ndarray):
    try:
        return cho_factor(a, lower=True, check_finite=False)
    except LinAlgError:
        pass
    dim = a.shape[0]
    jitter = 1e-12 * np.trace(a) / dim
    try:
        return cho_factor(a + jitter * np.eye(dim), lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotPositiveDefinite(
            f"matrix of size {dim} is not positive definite even after jitter {jitter:.3g}"
        ) from exc


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``.

    A Cholesky factorization is attempted first. If it fails, the diagonal is
    loaded once with ``1e-12 * trace(a) / dim`` and the factorization is
    retried; a second failure raises :class:`NotPositiveDefinite`.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    return cho_solve(_cholesky(a), b, check_finite=False)


def _log_i0_series(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for idx, xv in np.ndenumerate(x):
        q = (xv / 2.0) ** 2
        term = 1.0
        total = 1.0
        m = 0
        while True:
            m += 1
            term *= q / (m * m)
            total += term
            if term < 1e-17 * total:
                break
        out[idx] = math.log(total)
    return out


def _log_i0_asymptotic(x: np.ndarray) -> np.ndarray:
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        term = term * (2 * k - 1) ** 2 / (k * 8.0 * x)
        total = total + term
    return x - 0.5 * np.log(2.0 * np.pi * x) + np.log(total)


def log_bessel_i0(x):
    """Natural log of the modified Bessel function I0 for ``x >= 0``.

    Below ``BESSEL_CROSSOVER`` the power series is summed to convergence.
    Above it the Hankel asymptotic expansion is used; its leading term is
    ``x - 0.5*ln(2*pi*x)`` and the correction series keeps both branches
    within about 1e-11 of each other at the crossover.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("log_bessel_i0 requires x >= 0")
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat < BESSEL_CROSSOVER
    if np.any(small):
        out[small] = _log_i0_series(flat[small])
    if np.any(~small):
        out[~small] = _log_i0_asymptotic(flat[~small])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def gaussian_logpdf(x, mean, cov) -> float:
    """Log density of a multivariate real Gaussian."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if x.shape != mean.shape or cov.shape != (x.size, x.size):
        raise ValueError("dimension mismatch in gaussian_logpdf")
    c, lower = _cholesky(cov)
    diff = x - mean
    sol = cho_solve((c, lower), diff, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    return float(-0.5 * (diff @ sol + logdet + x.size * math.log(2.0 * math.pi)))
