"""Slow reference implementations used to check the fast paths.

Nothing in the receivers imports this module. Each routine here is written
from the model directly (grid filtering, numerical integration, exhaustive
search) rather than from the closed forms it is meant to check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .coding import CodeDefinition
from .eks import UNINFORMATIVE_VAR, SoftSymbolStats
from .errors import UnsupportedDimension
from .model import Constellation, CovarianceSpec


@dataclass
class PhaseGrid:
    points: np.ndarray
    prob: np.ndarray

    @classmethod
    def uniform(cls, num_points: int = 4096) -> "PhaseGrid":
        if num_points < 1024 or num_points & (num_points - 1):
            raise ValueError("num_points must be a power of two >= 1024")
        pts = 2 * np.pi * np.arange(num_points) / num_points
        return cls(pts, np.full(num_points, 1.0 / num_points))


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def _circular_stats(points: np.ndarray, prob: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # circular mean and wrapped second moment of each row of ``prob``
    mean = np.angle(prob @ np.exp(1j * points))
    var = np.sum(prob * _wrap(points[None, :] - mean[:, None]) ** 2, axis=1)
    return mean, var


def _transition_fft(num_points: int, q: float) -> np.ndarray:
    d = 2 * np.pi * np.arange(num_points) / num_points
    d = _wrap(d)
    if q <= 0:
        kern = np.zeros(num_points)
        kern[0] = 1.0
    else:
        kern = np.zeros(num_points)
        for wrap in range(-3, 4):
            kern += np.exp(-((d + 2 * np.pi * wrap) ** 2) / (2 * q))
        kern /= kern.sum()
    return np.fft.rfft(kern)


def grid_bayes_smoother(
    r_channel: np.ndarray,
    s_channel: np.ndarray,
    q: float,
    sigma2: float,
    num_points: int = 4096,
) -> dict[str, np.ndarray]:
    """Exact forward-backward recursion on a wrapped phase grid (one channel).

    The observation term is the full complex Gaussian
    ``exp(Re{r s* e^{-j theta}} / sigma2)`` and the first phase is uniform.
    Returns circular means and variances of the filtered and smoothed
    posteriors, each of length N.
    """
    r = np.asarray(r_channel)
    s = np.asarray(s_channel)
    if r.ndim > 1:
        if r.shape[0] != 1:
            raise UnsupportedDimension("grid oracle handles a single channel only")
        r, s = r[0], s[0]
    grid = PhaseGrid.uniform(num_points)
    th = grid.points
    n = r.size
    kf = _transition_fft(num_points, q)

    def conv(p):
        out = np.fft.irfft(np.fft.rfft(p) * kf, n=num_points)
        out = np.clip(out, 0.0, None)
        return out / out.sum()

    loglik = np.real((r * np.conj(s))[:, None] * np.exp(-1j * th)[None, :]) / sigma2
    lik = np.exp(loglik - loglik.max(axis=1, keepdims=True))

    alpha = np.empty((n, num_points))
    a = lik[0] / lik[0].sum()
    alpha[0] = a
    for k in range(1, n):
        a = conv(a) * lik[k]
        a /= a.sum()
        alpha[k] = a
    beta = np.ones(num_points) / num_points
    post = np.empty_like(alpha)
    post[-1] = alpha[-1]
    for k in range(n - 2, -1, -1):
        beta = conv(lik[k + 1] * beta)
        p = alpha[k] * beta
        post[k] = p / p.sum()
    f_mean, f_var = _circular_stats(th, alpha)
    s_mean, s_var = _circular_stats(th, post)
    return {
        "filtered_mean": f_mean,
        "filtered_var": f_var,
        "smoothed_mean": s_mean,
        "smoothed_var": s_var,
        "posterior": post,
        "grid": th,
    }


def quadrature_pu(
    r: complex,
    s_mean: complex,
    eff_var: float,
    theta_s: float,
    m_s: float,
    constellation: Constellation,
    sigma2: float,
    num_points: int = 4096,
) -> np.ndarray:
    """Upward message by direct integration of the Gaussian-projected integrand.

    ``P_u(s) ∝ ∫ CN(r; s e^{jθ}, 2σ²) / CN(r; s̄ e^{jθ}, 2σ̃²) N(θ; θ̂, M) dθ``,
    integrated with the trapezoid rule over ``θ̂ ± 6√M``.
    """
    if m_s <= 0:
        raise ValueError("posterior variance must be positive")
    half = 6.0 * np.sqrt(m_s)
    th = np.linspace(theta_s - half, theta_s + half, num_points)
    rot = np.exp(1j * th)
    pts = constellation.points[:, None]
    log_num = -np.abs(r - pts * rot[None, :]) ** 2 / (2 * sigma2)
    log_den = -np.abs(r - s_mean * rot) ** 2 / (2 * eff_var)
    log_prior = -((th - theta_s) ** 2) / (2 * m_s)
    logi = log_num - log_den[None, :] + log_prior[None, :]
    shift = logi.max()
    vals = np.trapezoid(np.exp(logi - shift), th, axis=1)
    return vals / vals.sum()


def quadrature_g(
    r: complex,
    theta_s: float,
    m_s: float,
    constellation: Constellation,
    sigma2: float,
    nodes: int = 80,
) -> np.ndarray:
    """``g(s) ∝ exp(-E|r - s e^{jΘ}|² / (2σ²))`` with the expectation taken by
    Gauss-Hermite quadrature over ``Θ ~ N(θ̂, M)``."""
    x, w = np.polynomial.hermite.hermgauss(nodes)
    th = theta_s + np.sqrt(2.0 * m_s) * x
    w = w / np.sqrt(np.pi)
    dist = np.abs(r - constellation.points[:, None] * np.exp(1j * th)[None, :]) ** 2
    expected = dist @ w
    logg = -expected / (2 * sigma2)
    g = np.exp(logg - logg.max())
    return g / g.sum()


def ml_decode(llr: np.ndarray, code: CodeDefinition) -> np.ndarray:
    """Maximum-likelihood codeword by enumerating all ``2^k`` codewords."""
    if code.k > 16:
        raise ValueError("exhaustive decoding is limited to k <= 16")
    infos = np.array(list(product([0, 1], repeat=code.k)), dtype=np.uint8)
    book = code.encode(infos)
    score = (1 - 2.0 * book) @ np.asarray(llr, dtype=float)
    return book[int(np.argmax(score))]


def ekf_forward_product_form(
    r: np.ndarray, stats: SoftSymbolStats, cov: CovarianceSpec, es: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Forward EKF written as the product of the linearized likelihood
    ``N(θ; θ̂_{k-1} + h̃, V^{-1})`` and the prediction ``N(θ; θ̂_{k-1}, P)``
    via the Gaussian product identity with explicit inverses.

    Only valid when every soft mean is nonzero (``V`` invertible).
    """
    mean, eff = stats.mean, stats.eff_var
    if np.any(mean == 0):
        raise ValueError("product form needs nonzero soft means everywhere")
    dim, n = r.shape
    f_mean = np.zeros((dim, n))
    f_cov = np.zeros((n, dim, dim))
    f_mean[:, 0] = np.angle(r[:, 0] * np.conj(mean[:, 0]))
    f_cov[0] = np.diag(eff[:, 0] / es)
    eye = np.eye(dim)
    for k in range(1, n):
        a_cov = f_cov[k - 1] + cov.q
        prev = f_mean[:, k - 1]
        h_tilde = np.imag(r[:, k] * np.exp(-1j * prev) / mean[:, k])
        b_cov = np.diag(eff[:, k] / np.abs(mean[:, k]) ** 2)
        b_inv = np.linalg.inv(b_cov)
        t = np.linalg.inv(eye + a_cov @ b_inv)
        f_cov[k] = t @ a_cov
        f_mean[:, k] = t @ prev + t @ a_cov @ b_inv @ (prev + h_tilde)
    return f_mean, f_cov


def uninformative_start_var() -> float:
    return UNINFORMATIVE_VAR


def linearization_mse_reference(
    linewidth_hz: float,
    baud: float,
    sigma2: float | None,
    constellation: Constellation,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Independent Monte Carlo of the one-sample linearized estimator.

    Works on the phase-error form ``sin(Δ) + Im{n/s} - Δ`` with polar
    Box-Muller noise instead of forming ``r`` explicitly. Returns the MSE
    and its standard error.
    """
    q = 2 * np.pi * linewidth_hz / baud
    u1 = rng.random(samples)
    u2 = rng.random(samples)
    delta = np.sqrt(q) * np.sqrt(-2 * np.log1p(-u1)) * np.cos(2 * np.pi * u2)
    s = constellation.points[rng.integers(constellation.order, size=samples)]
    err = np.sin(delta) - delta
    if sigma2:
        v1 = rng.random(samples)
        v2 = rng.random(samples)
        rad = np.sqrt(-2 * sigma2 * np.log1p(-v1))
        noise = rad * np.exp(2j * np.pi * v2)
        err = err + np.imag(noise / s)
    sq = err**2
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(samples))


def linearization_mse_closed_form(
    linewidth_hz: float, baud: float, sigma2: float | None, constellation: Constellation
) -> float:
    """``E[(sin X - X)^2] + sigma2 * E[1/|s|^2]`` for ``X ~ N(0, 2π Δν / baud)``."""
    q = 2 * np.pi * linewidth_hz / baud
    lin = 0.5 * (1 - np.exp(-2 * q)) - 2 * q * np.exp(-q / 2) + q
    noise = 0.0 if not sigma2 else sigma2 * float(np.mean(1.0 / np.abs(constellation.points) ** 2))
    return float(lin + noise)
