"""Constellations, pilot grids and the phase-innovation covariance.

Grids of complex samples (received, transmitted, noise) are plain
``(D, N)`` numpy arrays throughout the package: row ``i`` is channel ``i``
and column ``k`` is time index ``k`` (zero-based).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRate, NotPSD, UnsupportedOrder


@dataclass(frozen=True, eq=False)
class Constellation:
    """Labelled constellation.

    ``points[m]`` carries the bit label ``labels[m]`` (MSB first), and ``m`` is
    the integer value of that label, so ``points`` doubles as the bit-to-symbol
    lookup table.
    """

    points: np.ndarray
    labels: np.ndarray
    es: float = 1.0

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    def nearest(self, z: np.ndarray) -> np.ndarray:
        """Index of the closest point for every sample in ``z``."""
        z = np.asarray(z)
        grid = self._grid()
        if grid is None:
            d = np.abs(z[..., None] - self.points) ** 2
            return np.argmin(d, axis=-1)
        re_levels, im_levels, table = grid
        return table[_nearest_level(z.real, re_levels), _nearest_level(z.imag, im_levels)]

    def _grid(self):
        # square/rectangular lattices decide per axis, which avoids an (..., M) distance array
        cached = self.__dict__.get("_grid_cache")
        if cached is not None:
            return cached[0]
        re_levels = np.unique(np.round(self.points.real, 12))
        im_levels = np.unique(np.round(self.points.imag, 12))
        result = None
        if re_levels.size * im_levels.size == self.order:
            table = np.full((re_levels.size, im_levels.size), -1)
            ri = _nearest_level(self.points.real, re_levels)
            ii = _nearest_level(self.points.imag, im_levels)
            table[ri, ii] = np.arange(self.order)
            if np.all(table >= 0):
                result = (re_levels, im_levels, table)
        object.__setattr__(self, "_grid_cache", (result,))
        return result

    def bits_to_indices(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return bits @ weights

    def indices_to_bits(self, idx: np.ndarray) -> np.ndarray:
        return self.labels[np.asarray(idx)].reshape(-1)


def _nearest_level(x: np.ndarray, levels: np.ndarray) -> np.ndarray:
    if levels.size == 1:
        return np.zeros(np.shape(x), dtype=int)
    mids = 0.5 * (levels[1:] + levels[:-1])
    return np.searchsorted(mids, x)


def _gray(n_bits: int) -> np.ndarray:
    i = np.arange(1 << n_bits)
    return i ^ (i >> 1)


def make_qam(order: int, es: float = 1.0) -> Constellation:
    """Square QAM with Gray labelling on each axis, scaled to energy ``es``.

    The first half of every label selects the in-phase level and the second
    half the quadrature level.
    """
    if order not in (4, 16, 64, 256):
        raise UnsupportedOrder(f"square QAM order must be 4, 16, 64 or 256, got {order}")
    if es <= 0:
        raise ValueError("es must be positive")
    rm = int(np.log2(order))
    half = rm // 2
    side = 1 << half
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    # gray[p] is the label of the p-th level from the left
    axis_label_to_level = np.empty(side)
    axis_label_to_level[_gray(half)] = levels
    label_int = np.arange(order)
    re = axis_label_to_level[label_int >> half]
    im = axis_label_to_level[label_int & (side - 1)]
    scale = np.sqrt(es / (2.0 * (side**2 - 1) / 3.0))
    points = scale * (re + 1j * im)
    labels = ((label_int[:, None] >> np.arange(rm - 1, -1, -1)) & 1).astype(np.uint8)
    return Constellation(points=points, labels=labels, es=float(es))


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Phase-innovation covariance ``q`` (rad^2 per symbol) and per-channel
    AWGN variance per real dimension ``sigma2``."""

    q: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        if sigma2.size == 1 and q.shape[0] > 1:
            sigma2 = np.full(q.shape[0], sigma2[0])
        if q.shape != (sigma2.size, sigma2.size):
            raise ValueError(f"q has shape {q.shape} but there are {sigma2.size} channels")
        if np.any(sigma2 <= 0):
            raise ValueError("noise variances must be positive")
        if not np.allclose(q, q.T, rtol=1e-12, atol=0):
            raise NotPSD("q is not symmetric")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def dim(self) -> int:
        return self.sigma2.size

    def per_channel(self) -> "CovarianceSpec":
        """Same marginals with the cross-channel correlation removed."""
        return CovarianceSpec(np.diag(np.diag(self.q)), self.sigma2)


def build_covariance(var_lpn: float, var_drift: float, dim: int) -> np.ndarray:
    """Common laser phase noise plus independent per-channel drift.

    Diagonal entries are ``var_lpn + var_drift``; all other entries are
    ``var_lpn``.
    """
    if var_lpn < 0 or var_drift < 0:
        raise ValueError("variances must be nonnegative")
    return np.full((dim, dim), float(var_lpn)) + float(var_drift) * np.eye(dim)


def laser_phase_variance(linewidth_times_ts: float) -> float:
    """Per-symbol random-walk variance ``2*pi*dnu*Ts``."""
    return 2.0 * np.pi * linewidth_times_ts


@dataclass(frozen=True, eq=False)
class PilotGrid:
    mask: np.ndarray
    values: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def rate(self) -> float:
        return float(self.mask.mean())

    def to_text(self) -> str:
        """One line per channel, ``P`` for pilot slots and ``D`` for data."""
        return "\n".join("".join("P" if p else "D" for p in row) for row in self.mask)

    @classmethod
    def from_text(cls, text: str, values: np.ndarray | None = None) -> "PilotGrid":
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("all mask rows must have the same length")
        bad = set("".join(rows)) - {"P", "D"}
        if bad:
            raise ValueError(f"unexpected mask characters {sorted(bad)}")
        mask = np.array([[c == "P" for c in r] for r in rows], dtype=bool)
        if values is None:
            values = np.zeros(mask.shape, dtype=complex)
        return cls(mask=mask, values=np.asarray(values, dtype=complex))


def pilot_period(rate: float) -> int:
    if not 0 < rate < 1:
        raise InvalidRate(f"pilot rate must lie in (0, 1), got {rate}")
    period = int(round(1.0 / rate))
    if period < 1:
        raise InvalidRate(f"pilot rate {rate} gives no usable period")
    return period


def wrapped_diagonal_mask(
    dim: int, n: int, rate: float, period: int | None = None, stagger: int | None = None
) -> np.ndarray:
    period = pilot_period(rate) if period is None else int(period)
    stagger = period // dim if stagger is None else int(stagger)
    k = np.arange(n)
    i = np.arange(dim)[:, None]
    return (k[None, :] - i * stagger) % period == 0


def place_pilots_wrapped_diagonal(
    dim: int,
    n: int,
    rate: float,
    constellation: Constellation,
    rng: np.random.Generator,
    period: int | None = None,
    stagger: int | None = None,
) -> PilotGrid:
    """Pilots on a diagonal through the channel/time grid that wraps in time.

    Channel ``i`` (zero-based) holds a pilot at every time ``k`` with
    ``(k - i*stagger) mod period == 0``, where ``period = round(1/rate)`` and
    ``stagger = period // dim`` unless given. Pilot symbols are drawn
    uniformly from the constellation.
    """
    mask = wrapped_diagonal_mask(dim, n, rate, period, stagger)
    values = np.zeros((dim, n), dtype=complex)
    values[mask] = constellation.points[rng.integers(constellation.order, size=int(mask.sum()))]
    return PilotGrid(mask=mask, values=values)
