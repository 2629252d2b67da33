"""Soft-input extended Kalman smoother for a multichannel phase random walk.

The forward pass is an EKF linearized around the previous filtered phase,
written in the reduced form that only needs the diagonal observation
precision ``V_k = diag(|mean|^2 / eff_var)`` and the innovation vector
``h_k``. The backward pass is a standard Rauch-Tung-Striebel smoother.
Both receivers drive the same recursion and differ only in the soft symbol
statistics they feed it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroSymbol
from .model import CovarianceSpec
from .numerics import spd_solve

# prior variance given to a channel whose first slot carries no symbol information
UNINFORMATIVE_VAR = 1e4
# soft means below this fraction of sqrt(Es) carry no phase information; this
# also absorbs rounding residue from averaging a symmetric constellation
MEAN_FLOOR = 1e-9
# a channel is linearized only once its accumulated precision sum |mean|^2/eff_var
# reaches this value (phase std about 0.25 rad); a single weak slot is too noisy
ANCHOR_PRECISION = 16.0


@dataclass
class SoftSymbolStats:
    """Per-slot soft symbol mean and effective noise variance, both ``(D, N)``."""

    mean: np.ndarray
    eff_var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=complex)
        self.eff_var = np.asarray(self.eff_var, dtype=float)
        if self.mean.shape != self.eff_var.shape:
            raise ValueError("mean and eff_var must have the same shape")
        if np.any(self.eff_var <= 0):
            raise ValueError("effective variances must be positive")


@dataclass
class PhasePosterior:
    """Gaussian phase posteriors.

    ``mean`` is ``(D, N)`` and ``cov`` is ``(N, D, D)``. The forward-pass
    quantities are kept so the smoother (or a caller) can reuse them;
    ``pred_cov[k]`` is the one-step prediction covariance into time ``k``.
    """

    mean: np.ndarray
    cov: np.ndarray
    forward_mean: np.ndarray | None = None
    forward_cov: np.ndarray | None = None
    pred_cov: np.ndarray | None = None

    @property
    def var(self) -> np.ndarray:
        """Marginal variances as a ``(D, N)`` array."""
        return np.diagonal(self.cov, axis1=1, axis2=2).T


def ekf_forward(
    r: np.ndarray, stats: SoftSymbolStats, cov: CovarianceSpec, es: float = 1.0
) -> PhasePosterior:
    """Forward EKF pass.

    The first column initializes each channel at ``angle(r * conj(mean))``
    with variance ``eff_var / es``. A channel whose first slot is weaker than
    ``ANCHOR_PRECISION`` starts uninformative. Its slots are then summed
    coherently as ``r * conj(mean) / eff_var``, de-rotated by the common drift
    that the anchored channels have tracked so far, without updating the state,
    until their precision reaches the threshold, or the channel's total
    precision over the frame if that is smaller. The linearization point
    then moves to the angle of that sum and the regular update collapses the
    large prior variance. Soft means below ``MEAN_FLOOR * sqrt(es)`` count
    as zero.
    """
    r = np.asarray(r, dtype=complex)
    dim, n = r.shape
    if stats.mean.shape != (dim, n):
        raise ValueError(f"stats shape {stats.mean.shape} does not match r {r.shape}")
    q = cov.q
    floor = MEAN_FLOOR * np.sqrt(es)
    mean = np.where(np.abs(stats.mean) > floor, stats.mean, 0.0)
    eff = stats.eff_var

    f_mean = np.zeros((dim, n))
    f_cov = np.zeros((n, dim, dim))
    p_cov = np.zeros((n, dim, dim))

    prec = np.abs(mean) ** 2 / eff
    pull = r * np.conj(mean) / eff
    # a channel whose whole frame holds less precision anchors on its last slot
    need = np.minimum(ANCHOR_PRECISION, prec.sum(axis=1) * (1 - 1e-9))
    known = (np.abs(mean[:, 0]) > 0) & (prec[:, 0] >= need)
    f_mean[known, 0] = np.angle(r[known, 0] * np.conj(mean[known, 0]))
    f_cov[0] = np.diag(np.where(known, eff[:, 0] / es, UNINFORMATIVE_VAR))
    p_cov[0] = f_cov[0]
    anchored = known.copy()
    acc = np.where(known, 0.0, pull[:, 0])
    acc_prec = np.where(known, 0.0, prec[:, 0])
    # common drift seen by anchored channels; waiting slots are summed relative
    # to it so the laser walk between sparse pilots does not blur the sum
    drift = 0.0

    eye = np.eye(dim)
    for k in range(1, n):
        was_anchored = anchored.copy()
        m_pred = f_cov[k - 1] + q
        p_cov[k] = m_pred
        lin = f_mean[:, k - 1].copy()
        mk = mean[:, k]
        active = np.abs(mk) > 0
        waiting = active & ~anchored
        if np.any(waiting):
            acc[waiting] += pull[waiting, k] * np.exp(-1j * drift)
            acc_prec[waiting] += prec[waiting, k]
            fresh = waiting & (acc_prec >= need)
            target = np.angle(acc[fresh]) + drift
            lin[fresh] = target + 2 * np.pi * np.round((lin[fresh] - target) / (2 * np.pi))
            anchored |= fresh
            # slots seen before the anchor only steer the linearization point
            mk = np.where(anchored, mk, 0.0)
            active = active & anchored
        v = np.abs(mk) ** 2 / eff[:, k]
        h = np.imag(r[:, k] * np.conj(mk) * np.exp(-1j * lin)) / eff[:, k]
        if np.any(active):
            # (I + P V)^-1 P written with W = sqrt(V) so the solve stays symmetric
            w = np.sqrt(v)
            g = m_pred * w[None, :]
            s = eye + w[:, None] * g
            m_new = m_pred - g @ spd_solve(s, g.T)
            m_new = 0.5 * (m_new + m_new.T)
        else:
            m_new = m_pred
        f_cov[k] = m_new
        f_mean[:, k] = lin + m_new @ h
        if np.any(was_anchored):
            drift += float(np.mean(f_mean[was_anchored, k] - f_mean[was_anchored, k - 1]))
    return PhasePosterior(
        mean=f_mean.copy(), cov=f_cov.copy(), forward_mean=f_mean, forward_cov=f_cov, pred_cov=p_cov
    )


def rtss_backward(forward: PhasePosterior, cov: CovarianceSpec | None = None) -> PhasePosterior:
    """Rauch-Tung-Striebel pass over a forward EKF result.

    ``cov`` is accepted for symmetry with the forward pass; the prediction
    covariances stored by :func:`ekf_forward` already include ``Q``.
    """
    f_mean = forward.forward_mean
    f_cov = forward.forward_cov
    p_cov = forward.pred_cov
    dim, n = f_mean.shape
    s_mean = np.empty_like(f_mean)
    s_cov = np.empty_like(f_cov)
    s_mean[:, -1] = f_mean[:, -1]
    s_cov[-1] = f_cov[-1]
    for k in range(n - 2, -1, -1):
        # A_k = M_k P_{k+1}^-1, both symmetric
        a = spd_solve(p_cov[k + 1], f_cov[k]).T
        s_mean[:, k] = f_mean[:, k] + a @ (s_mean[:, k + 1] - f_mean[:, k])
        m = f_cov[k] + a @ (s_cov[k + 1] - p_cov[k + 1]) @ a.T
        s_cov[k] = 0.5 * (m + m.T)
    return PhasePosterior(
        mean=s_mean, cov=s_cov, forward_mean=f_mean, forward_cov=f_cov, pred_cov=p_cov
    )


def smooth(
    r: np.ndarray, stats: SoftSymbolStats, cov: CovarianceSpec, es: float = 1.0
) -> PhasePosterior:
    """Forward EKF followed by the RTS smoother."""
    return rtss_backward(ekf_forward(r, stats, cov, es), cov)


def single_step_phase_estimate(r_sample, s_sample, theta_prev):
    """Linearized one-sample phase estimate ``theta_prev + Im{r e^{-j theta_prev} / s}``."""
    s_sample = np.asarray(s_sample)
    if np.any(s_sample == 0):
        raise ZeroSymbol("transmitted symbol must be nonzero")
    out = theta_prev + np.imag(np.asarray(r_sample) * np.exp(-1j * np.asarray(theta_prev)) / s_sample)
    return out if np.ndim(out) else float(out)
