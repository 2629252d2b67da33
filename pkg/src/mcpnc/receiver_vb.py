"""Variational Bayes receiver (VB-PNC).

The factorized posterior ``q(b, s) q(theta)`` is updated by alternating
between the phase factor, which the soft-input smoother approximates from
the soft symbol means, and the symbol factor, whose per-slot term ``g`` is a
rotated-AWGN likelihood using the first circular moment of the phase.
"""

from __future__ import annotations

import numpy as np

from .eks import PhasePosterior, SoftSymbolStats, smooth
from .model import Constellation, CovarianceSpec, PilotGrid
from .pmf import SymbolPmf, check_log_normalized


def vb_soft_means(
    qs: SymbolPmf | None,
    constellation: Constellation,
    sigma2: np.ndarray,
    pilots: PilotGrid,
) -> SoftSymbolStats:
    """Soft means under ``q_S``; the noise variance is left at ``sigma2``.

    ``qs=None`` marks the first iteration (all data means zero).
    """
    dim, n = pilots.shape
    if qs is None:
        mean = np.zeros((dim, n), dtype=complex)
    else:
        check_log_normalized(qs.logp)
        mean = qs.prob @ constellation.points
    mean = np.where(pilots.mask, pilots.values, mean)
    eff = np.broadcast_to(np.asarray(sigma2, dtype=float)[:, None], (dim, n)).copy()
    return SoftSymbolStats(mean=mean, eff_var=eff)


def circular_moment(posterior: PhasePosterior) -> np.ndarray:
    """``E[exp(j theta)] = exp(j mean - var/2)`` for each slot."""
    return np.exp(1j * posterior.mean - 0.5 * posterior.var)


def compute_g(
    r: np.ndarray, alpha: np.ndarray, constellation: Constellation, cov: CovarianceSpec
) -> SymbolPmf:
    """Normalized ``g(s) ∝ exp(Re{r s* alpha*}/sigma2 - |s|^2/(2 sigma2))``."""
    sig = cov.sigma2[:, None, None]
    pts = constellation.points
    corr = np.real((r * np.conj(alpha))[..., None] * np.conj(pts))
    return SymbolPmf.from_log(corr / sig - np.abs(pts) ** 2 / (2.0 * sig))


def vb_pnc_iteration(
    r: np.ndarray,
    qs: SymbolPmf | None,
    cov: CovarianceSpec,
    pilots: PilotGrid,
    constellation: Constellation,
) -> SymbolPmf:
    """One VB-PNC iteration from ``q_S`` (decoder a-posteriori PMFs) to ``g``."""
    stats = vb_soft_means(qs, constellation, cov.sigma2, pilots)
    posterior = smooth(r, stats, cov, constellation.es)
    return compute_g(r, circular_moment(posterior), constellation, cov)


def uncoded_update(g: SymbolPmf, pilots: PilotGrid, constellation: Constellation) -> SymbolPmf:
    """Symbol factor for uncoded transmission: ``q_S ∝ P(s) g(s)``.

    Data slots have a uniform prior, so ``q_S = g`` there; pilot slots are
    degenerate on the pilot.
    """
    logp = g.logp.copy()
    if np.any(pilots.mask):
        idx = constellation.nearest(pilots.values[pilots.mask])
        degenerate = np.full((idx.size, constellation.order), -np.inf)
        degenerate[np.arange(idx.size), idx] = 0.0
        logp[pilots.mask] = degenerate
    return SymbolPmf(logp)
