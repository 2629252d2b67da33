"""Correlated phase-noise walks and the AWGN phase-noise channel."""

from __future__ import annotations

import numpy as np

from .errors import NotPSD
from .model import CovarianceSpec


def symmetric_sqrt(q: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, negative eigenvalues clipped."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    w, v = np.linalg.eigh(q)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if np.min(w, initial=0.0) < -1e-9 * scale:
        raise NotPSD(f"covariance has eigenvalue {np.min(w):.3g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def generate_phase_walk(q: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unwrapped ``(D, n)`` phase trajectory.

    The first column is uniform on ``[0, 2*pi)``; increments are i.i.d.
    zero-mean Gaussian with covariance ``q``.
    """
    root = symmetric_sqrt(q)
    dim = root.shape[0]
    theta = np.empty((dim, n))
    theta[:, 0] = rng.uniform(0.0, 2.0 * np.pi, size=dim)
    if n > 1:
        steps = root @ rng.standard_normal((dim, n - 1))
        theta[:, 1:] = theta[:, :1] + np.cumsum(steps, axis=1)
    return theta


def awgn(sigma2: np.ndarray, shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    std = np.sqrt(np.asarray(sigma2, dtype=float))[:, None]
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(
    s: np.ndarray, theta: np.ndarray, cov: CovarianceSpec, rng: np.random.Generator
) -> np.ndarray:
    """``r = s * exp(j*theta) + n`` with per-channel noise variance ``cov.sigma2``."""
    s = np.asarray(s)
    if s.shape != theta.shape or s.shape[0] != cov.dim:
        raise ValueError(f"shape mismatch: s {s.shape}, theta {theta.shape}, D={cov.dim}")
    return s * np.exp(1j * theta) + awgn(cov.sigma2, s.shape, rng)
