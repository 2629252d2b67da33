"""Per-slot symbol probability mass functions kept in the log domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import UnnormalizedPmf


@dataclass
class SymbolPmf:
    """Normalized log-probabilities over the constellation, shape ``(D, N, M)``."""

    logp: np.ndarray

    @classmethod
    def from_log(cls, f: np.ndarray) -> "SymbolPmf":
        """Normalize unnormalized log-likelihoods with a max shift."""
        f = np.asarray(f, dtype=float)
        f = f - np.max(f, axis=-1, keepdims=True)
        return cls(f - np.log(np.sum(np.exp(f), axis=-1, keepdims=True)))

    @classmethod
    def from_prob(cls, p: np.ndarray, tol: float = 1e-6) -> "SymbolPmf":
        p = np.asarray(p, dtype=float)
        check_normalized(p, tol)
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    @classmethod
    def uniform(cls, dim: int, n: int, order: int) -> "SymbolPmf":
        return cls(np.full((dim, n, order), -np.log(order)))

    @property
    def prob(self) -> np.ndarray:
        return np.exp(self.logp)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.logp.shape

    def argmax(self) -> np.ndarray:
        return np.argmax(self.logp, axis=-1)

    def replace_slots(self, mask: np.ndarray, other: "SymbolPmf") -> "SymbolPmf":
        """Copy of ``self`` with the slots selected by ``mask`` taken from ``other``."""
        logp = self.logp.copy()
        logp[mask] = other.logp[mask]
        return SymbolPmf(logp)


def check_normalized(p: np.ndarray, tol: float = 1e-6) -> None:
    if np.any(p < -tol):
        raise UnnormalizedPmf("negative probability")
    total = np.sum(p, axis=-1)
    if np.any(np.abs(total - 1.0) > tol):
        raise UnnormalizedPmf(f"slot sums deviate from 1 by up to {np.max(np.abs(total - 1)):.3g}")


def check_log_normalized(logp: np.ndarray, tol: float = 1e-6) -> None:
    total = logsumexp(logp, axis=-1)
    if np.any(np.abs(total) > tol):
        raise UnnormalizedPmf(f"slot log-sums deviate from 0 by up to {np.max(np.abs(total)):.3g}")
