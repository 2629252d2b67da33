"""Factor-graph / sum-product receiver (FG-PNC).

One iteration turns decoder-side symbol messages ``P_d`` into channel-side
likelihood messages ``P_u``:

1. project every ``P_d`` onto a single complex Gaussian in ``r`` (soft mean and
   inflated noise variance),
2. run the soft-input smoother jointly over all channels,
3. evaluate the closed-form Tikhonov-approximated upward message per slot.
"""

from __future__ import annotations

import numpy as np

from .eks import PhasePosterior, SoftSymbolStats, smooth
from .model import Constellation, CovarianceSpec, PilotGrid
from .numerics import log_bessel_i0
from .pmf import SymbolPmf, check_log_normalized

XI_FLOOR = 1e-12


def project_soft_stats(
    pd: SymbolPmf | None,
    constellation: Constellation,
    sigma2: np.ndarray,
    pilots: PilotGrid,
) -> SoftSymbolStats:
    """Soft mean ``sum s P_d(s)`` and variance ``sigma2 + Var[S]/2`` per slot.

    ``pd=None`` stands for the first iteration, where every data slot is
    uniform; this gives mean 0 and variance ``sigma2 + Es/2`` for a zero-mean
    constellation. Pilot slots always get the pilot value and ``sigma2``.
    """
    dim, n = pilots.shape
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float)[:, None], (dim, n))
    pts = constellation.points
    if pd is None:
        p = np.full((dim, n, pts.size), 1.0 / pts.size)
    else:
        check_log_normalized(pd.logp)
        p = pd.prob
    mean = p @ pts
    var = np.sum(np.abs(pts[None, None, :] - mean[..., None]) ** 2 * p, axis=-1)
    eff = sigma2 + 0.5 * var
    mean = np.where(pilots.mask, pilots.values, mean)
    eff = np.where(pilots.mask, sigma2, eff)
    return SoftSymbolStats(mean=mean, eff_var=eff)


def _data_terms(r, stats: SoftSymbolStats, constellation: Constellation, sigma2) -> np.ndarray:
    # r s*/sigma2 - r conj(mean)/eff_var, shape (D, N, M)
    sig = np.asarray(sigma2, dtype=float)[:, None, None]
    rr = r[..., None]
    return rr * np.conj(constellation.points) / sig - (rr * np.conj(stats.mean[..., None])) / stats.eff_var[..., None]


def xi(
    r: np.ndarray,
    stats: SoftSymbolStats,
    posterior: PhasePosterior,
    constellation: Constellation,
    sigma2: np.ndarray,
) -> np.ndarray:
    """Tikhonov parameter of the product of messages, shape ``(D, N, M)``."""
    prior = np.exp(1j * posterior.mean) / posterior.var
    return prior[..., None] + _data_terms(r, stats, constellation, sigma2)


def compute_pu(
    r: np.ndarray,
    stats: SoftSymbolStats,
    posterior: PhasePosterior,
    constellation: Constellation,
    cov: CovarianceSpec,
    exact_bessel: bool = False,
) -> SymbolPmf:
    """Upward symbol messages ``P_u`` for every slot.

    Uses ``f(s) = |xi| - |s|^2/(2 sigma2) - ln|xi|/2``, the large-argument
    form of ``ln I0(|xi|)``. ``exact_bessel=True`` evaluates ``ln I0``
    exactly instead. ``|xi|`` is floored at ``XI_FLOOR`` inside the log.
    """
    prior = (np.exp(1j * posterior.mean) / posterior.var)[..., None]
    delta = _data_terms(r, stats, constellation, cov.sigma2)
    z = np.abs(prior + delta)
    # |xi| - |prior| without cancellation; |prior| is constant per slot and
    # drops out in normalization, which keeps f accurate when M^s is tiny
    excess = (2.0 * np.real(np.conj(prior) * delta) + np.abs(delta) ** 2) / (z + np.abs(prior))
    energy = np.abs(constellation.points) ** 2 / (2.0 * cov.sigma2[:, None, None])
    if exact_bessel:
        f = log_bessel_i0(z) - energy
    else:
        f = excess - energy - 0.5 * np.log(np.maximum(z, XI_FLOOR))
    return SymbolPmf.from_log(f)


def fg_pnc_iteration(
    r: np.ndarray,
    pd: SymbolPmf | None,
    cov: CovarianceSpec,
    pilots: PilotGrid,
    constellation: Constellation,
) -> SymbolPmf:
    """One FG-PNC iteration from decoder messages ``pd`` to channel messages ``P_u``."""
    stats = project_soft_stats(pd, constellation, cov.sigma2, pilots)
    posterior = smooth(r, stats, cov, constellation.es)
    return compute_pu(r, stats, posterior, constellation, cov)
