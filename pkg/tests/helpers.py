"""Shared frame builders for receiver tests."""

import numpy as np

from mcpnc.channel import apply_channel, generate_phase_walk
from mcpnc.eks import PhasePosterior
from mcpnc.model import (
    Constellation,
    CovarianceSpec,
    PilotGrid,
    build_covariance,
    laser_phase_variance,
    make_qam,
    place_pilots_wrapped_diagonal,
)
from mcpnc.pmf import SymbolPmf
from mcpnc.receiver_fg import project_soft_stats


def two_point() -> Constellation:
    return Constellation(np.array([1.0 + 0j, -1.0 + 0j]), np.array([[0], [1]], dtype=np.uint8))


def all_pilot_frame(rng, dim=2, n=100, order=16, sigma2=0.01, linewidth_ts=5e-5):
    c = make_qam(order)
    idx = rng.integers(order, size=(dim, n))
    s = c.points[idx]
    var = laser_phase_variance(linewidth_ts)
    cov = CovarianceSpec(build_covariance(var, var / 1000, dim), sigma2)
    r = apply_channel(s, generate_phase_walk(cov.q, n, rng), cov, rng)
    return c, r, idx, PilotGrid(np.ones((dim, n), bool), s), cov


def data_frame(rng, dim=2, n=400, order=16, sigma2=0.02, rate=0.05, linewidth_ts=5e-5, q=None):
    c = make_qam(order)
    pilots = place_pilots_wrapped_diagonal(dim, n, rate, c, rng)
    idx = rng.integers(order, size=(dim, n))
    idx = np.where(pilots.mask, c.nearest(pilots.values), idx)
    s = c.points[idx]
    if q is None:
        var = laser_phase_variance(linewidth_ts)
        q = build_covariance(var, var / 1000, dim)
    cov = CovarianceSpec(q, sigma2)
    theta = generate_phase_walk(q, n, rng)
    r = apply_channel(s, theta, cov, rng)
    return c, r, idx, pilots, cov, theta


def no_pilots(dim=1, n=1):
    return PilotGrid(np.zeros((dim, n), bool), np.zeros((dim, n), complex))


def single_slot(mean, var):
    return PhasePosterior(np.array([[mean]]), np.array([[[var]]]))


def random_fg_slot(rng, c, m_max=0.05, sig_range=(0.02, 0.12)):
    sigma2 = rng.uniform(*sig_range)
    ms = rng.uniform(0.0, m_max) + 1e-6
    th = rng.uniform(-np.pi, np.pi)
    s = c.points[rng.integers(c.order)]
    r = s * np.exp(1j * th) + np.sqrt(sigma2) * (rng.standard_normal() + 1j * rng.standard_normal())
    thhat = th + np.sqrt(ms) * rng.standard_normal()
    pd = SymbolPmf.from_log((rng.standard_normal(c.order) * rng.uniform(0, 3))[None, None])
    stats = project_soft_stats(pd, c, np.array([sigma2]), no_pilots())
    return r, stats, thhat, ms, sigma2
