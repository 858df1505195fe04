"""Monte Carlo estimators over a simulated ensemble.

Windows are closed intervals: a default exactly at either end counts.
Every estimate carries its binomial standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonFiniteEnsembleError
from .sde_engine import PathEnsemble


@dataclass(frozen=True)
class LossDistribution:
    """Histogram of the number of defaults per path (index k = exactly k defaults)."""

    counts: np.ndarray
    n_paths: int

    @property
    def n_banks(self) -> int:
        return len(self.counts) - 1

    @property
    def probabilities(self) -> np.ndarray:
        if self.n_paths == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.n_paths

    def tail_mass(self, k: int) -> float:
        """Probability of at least ``k`` defaults."""
        if self.n_paths == 0:
            return 0.0
        return float(self.counts[k:].sum() / self.n_paths)

    def rows(self):
        p = self.probabilities
        return [(k, int(c), float(p[k])) for k, c in enumerate(self.counts)]


@dataclass(frozen=True)
class RiskEstimate:
    probability: float
    standard_error: float
    n_paths: int

    @classmethod
    def from_count(cls, hits: int, n: int) -> "RiskEstimate":
        if n == 0:
            return cls(0.0, 0.0, 0)
        p = hits / n
        return cls(p, math.sqrt(p * (1 - p) / n), n)


def _check_window(ens: PathEnsemble, window) -> tuple:
    t1, t2 = float(window[0]), float(window[1])
    tol = 1e-12 * max(1.0, abs(ens.t1))
    if not (t1 <= t2 and t1 >= ens.t0 - tol and t2 <= ens.t1 + tol):
        raise DomainError(f"window [{t1}, {t2}] outside simulated span [{ens.t0}, {ens.t1}]")
    return t1, t2


def default_counts(ens: PathEnsemble, window) -> np.ndarray:
    """Number of banks per path whose default time lies in the closed window."""
    t1, t2 = _check_window(ens, window)
    ens.require_valid()
    dt = ens.default_time
    with np.errstate(invalid="ignore"):
        hit = (dt >= t1) & (dt <= t2)
    return hit.sum(axis=1)


def loss_distribution(ens: PathEnsemble, window) -> LossDistribution:
    c = default_counts(ens, window)
    return LossDistribution(np.bincount(c, minlength=ens.n_banks + 1).astype(np.int64), ens.n_paths)


def default_m(n_banks: int) -> int:
    """Size of the systemic event: more than half of the banks."""
    return n_banks // 2 + 1


def systemic_risk_probability(ens: PathEnsemble, window, M: int | None = None) -> RiskEstimate:
    """Frequency of paths with at least ``M`` defaults in the window."""
    n = ens.n_banks
    M = default_m(n) if M is None else M
    if int(M) != M or not n // 2 <= M <= n:
        raise DomainError(f"M must be an integer in [{n // 2}, {n}], got {M}")
    c = default_counts(ens, window)
    return RiskEstimate.from_count(int(np.count_nonzero(c >= M)), ens.n_paths)


def individual_default_probability(ens: PathEnsemble, window, bank: int) -> RiskEstimate:
    if int(bank) != bank or not 0 <= bank < ens.n_banks:
        raise DomainError(f"bank index must lie in [0, {ens.n_banks - 1}], got {bank}")
    t1, t2 = _check_window(ens, window)
    ens.require_valid()
    dt = ens.default_time[:, bank]
    with np.errstate(invalid="ignore"):
        hits = int(np.count_nonzero((dt >= t1) & (dt <= t2)))
    return RiskEstimate.from_count(hits, ens.n_paths)


__all__ = ["LossDistribution", "RiskEstimate", "loss_distribution", "systemic_risk_probability",
           "individual_default_probability", "default_counts", "default_m",
           "NonFiniteEnsembleError"]
