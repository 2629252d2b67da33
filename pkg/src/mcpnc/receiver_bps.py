"""Per-channel blind phase search with minimum-distance detection (BPS-EDD)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import pmf_to_llr
from .model import Constellation
from .pmf import SymbolPmf

QUADRANT = 0.5 * np.pi


@dataclass(frozen=True)
class BpsConfig:
    num_test_phases: int = 32
    window_half_length: int = 40
    known_initial_phase: bool = True

    def __post_init__(self):
        if self.num_test_phases < 2:
            raise ValueError("need at least two test phases")
        if self.window_half_length < 0:
            raise ValueError("window half length must be nonnegative")

    @property
    def window_length(self) -> int:
        return 2 * self.window_half_length + 1

    @classmethod
    def for_order(cls, order: int, **kw) -> "BpsConfig":
        return cls(num_test_phases=32 if order <= 16 else 64, **kw)


def _box_sum(x: np.ndarray, half: int) -> np.ndarray:
    # centred moving sum along the last axis, truncated at the edges
    n = x.shape[-1]
    c = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    hi = np.minimum(np.arange(n) + half + 1, n)
    lo = np.maximum(np.arange(n) - half, 0)
    return c[..., hi] - c[..., lo]


def bps_estimate(
    r_channel: np.ndarray,
    constellation: Constellation,
    config: BpsConfig = BpsConfig(),
    initial_phase: float | None = None,
) -> np.ndarray:
    """Phase estimate for one channel.

    Test phases ``b * (pi/2) / B`` de-rotate the samples; the squared distance
    to the nearest constellation point is box-filtered and minimized per
    symbol. The quarter-circle ambiguity is then unwrapped symbol by symbol,
    starting from the branch closest to ``initial_phase`` when
    ``config.known_initial_phase`` is set, and closest to zero otherwise.
    """
    r = np.asarray(r_channel, dtype=complex)
    if r.size == 0:
        raise ValueError("empty sequence")
    b = config.num_test_phases
    phases = np.arange(b) * QUADRANT / b
    rot = r[None, :] * np.exp(-1j * phases)[:, None]
    dist = np.abs(rot - constellation.points[constellation.nearest(rot)]) ** 2
    score = _box_sum(dist, config.window_half_length)
    raw = phases[np.argmin(score, axis=0)]
    est = np.unwrap(raw, period=QUADRANT)
    anchor = initial_phase if (config.known_initial_phase and initial_phase is not None) else 0.0
    est += QUADRANT * np.round((anchor - est[0]) / QUADRANT)
    return est


def edd_detect(
    r_channel: np.ndarray,
    phase: np.ndarray,
    constellation: Constellation,
    sigma2: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-distance decisions and bit LLRs after de-rotation.

    The LLRs treat the phase estimate as exact and use the AWGN likelihood
    ``exp(-|r e^{-j phase} - s|^2 / (2 sigma2))``. Returns the decided point
    indices and an ``(N, Rm)`` LLR array.
    """
    z = np.asarray(r_channel) * np.exp(-1j * np.asarray(phase))
    decisions = constellation.nearest(z)
    loglik = -np.abs(z[:, None] - constellation.points[None, :]) ** 2 / (2.0 * sigma2)
    llr = pmf_to_llr(SymbolPmf.from_log(loglik), constellation)
    return decisions, llr
