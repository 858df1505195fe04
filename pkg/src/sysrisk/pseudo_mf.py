"""Two-state pseudo mean-field approximation (the pseudo mean bank).

With ``Z = G - ln(phi)`` and ``S = H - ln(psi)``::

    dZ = beta_a dt + sigma_a dP,   beta_a = -alpha (1 - |rho_a|) Z - |rho_a| g S
    dS = beta_l dt + sigma_l dQ,   beta_l = -gamma (1 - |rho_l|) S - |rho_l| h Z

with independent ``dP``, ``dQ`` and ``Z0 = S0 = 0``. For ``rho = 0`` it is the
mean-field model ``dZ = -alpha Z dt + sigma_a dP``; that model has its own
kernel so the reduction can be checked bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .core_model import IdealBankPath, Schedule
from .errors import DomainError, NonFiniteEnsembleError
from .kernels import get_kernels
from .lq_control import CooperationRates
from .sde_engine import record_indices, step_grid


@dataclass(frozen=True)
class PmfState:
    t: float
    Z: float
    S: float


@dataclass
class PmfEnsemble:
    t0: float
    t1: float
    Z: np.ndarray
    S: np.ndarray
    valid: np.ndarray
    sample_times: np.ndarray
    traj_Z: np.ndarray | None = None
    traj_S: np.ndarray | None = None
    ideal: IdealBankPath | None = None

    @property
    def n_paths(self) -> int:
        return self.Z.shape[0]

    def require_valid(self):
        bad = int(np.count_nonzero(~self.valid))
        if bad:
            raise NonFiniteEnsembleError(f"{bad} of {self.n_paths} paths overflowed")

    def reserves(self) -> np.ndarray:
        """Capital reserves ``exp(Z + ln phi) - exp(S + ln psi)`` at the recorded times."""
        if self.traj_Z is None or self.ideal is None:
            raise DomainError("reserves need recorded trajectories and an ideal path")
        phi = np.array([self.ideal.phi.value(t) for t in self.sample_times])
        psi = np.array([self.ideal.psi.value(t) for t in self.sample_times])
        return np.exp(self.traj_Z + np.log(phi)) - np.exp(self.traj_S + np.log(psi))

    def state(self, p: int) -> PmfState:
        return PmfState(self.t1, float(self.Z[p]), float(self.S[p]))


def drift_beta(rates: CooperationRates, rho_a: float, rho_l: float, t: float,
               Z: float, S: float) -> tuple:
    alpha, gamma, g, h = rates.at(t)
    ra, rl = abs(rho_a), abs(rho_l)
    beta_a = -alpha * (1 - ra) * Z - ra * g * S
    beta_l = -gamma * (1 - rl) * S - rl * h * Z
    return beta_a, beta_l


def _as_schedule(x, kind):
    return x if isinstance(x, Schedule) else Schedule.constant(float(x), kind=kind)


def _common(rates, sigma_a, sigma_l, t0, t1, dt):
    times = step_grid(t0, t1, dt)
    tl = times[:-1]
    alpha, gamma, g, h = rates.on_grid(tl)
    sa = _as_schedule(sigma_a, "volatility").on_grid(tl)
    sl = _as_schedule(sigma_l, "volatility").on_grid(tl)
    sqdt = np.full(len(tl), math.sqrt((t1 - t0) / (len(times) - 1)))
    return times, alpha, gamma, g, h, sa, sl, sqdt


def simulate_pmf(rates: CooperationRates, rho_a: float, rho_l: float, sigma_a, sigma_l,
                 ideal: IdealBankPath | None, t0: float, t1: float, n_paths: int, dt: float,
                 seed: int, *, stream=(_rng.TAG_PMF,), record_stride: int = 0,
                 backend: str | None = None) -> PmfEnsemble:
    """Euler-Maruyama on ``(Z, S)``; path ``p`` uses counter stream ``p``."""
    if abs(rho_a) > 1 or abs(rho_l) > 1:
        raise DomainError("correlations must satisfy |rho| <= 1")
    times, alpha, gamma, g, h, sa, sl, sqdt = _common(rates, sigma_a, sigma_l, t0, t1, dt)
    ra, rl = abs(rho_a), abs(rho_l)
    rec = record_indices(len(times) - 1, record_stride)
    key = np.uint64(_rng.derive_key(int(seed), *stream))
    k = get_kernels(backend)
    Z, S, valid, trZ, trS = k.simulate_pmf(int(n_paths), key, times, alpha * (1 - ra), ra * g,
                                           gamma * (1 - rl), rl * h, sa, sl, sqdt, rec)
    return PmfEnsemble(t0, t1, Z, S, valid, times[rec], trZ if len(rec) else None,
                       trS if len(rec) else None, ideal)


def simulate_mf(rates: CooperationRates, sigma_a, sigma_l, ideal: IdealBankPath | None,
                t0: float, t1: float, n_paths: int, dt: float, seed: int, *,
                stream=(_rng.TAG_PMF,), record_stride: int = 0,
                backend: str | None = None) -> PmfEnsemble:
    """Mean-field model ``dZ = -alpha Z dt + sigma_a dP`` (``S`` analogous)."""
    times, alpha, gamma, _, _, sa, sl, sqdt = _common(rates, sigma_a, sigma_l, t0, t1, dt)
    rec = record_indices(len(times) - 1, record_stride)
    key = np.uint64(_rng.derive_key(int(seed), *stream))
    k = get_kernels(backend)
    Z, S, valid, trZ, trS = k.simulate_mf(int(n_paths), key, times, alpha, gamma, sa, sl, sqdt, rec)
    return PmfEnsemble(t0, t1, Z, S, valid, times[rec], trZ if len(rec) else None,
                       trS if len(rec) else None, ideal)


def write_trajectories(ens: PmfEnsemble, fh) -> None:
    """Write recorded samples as ``path,t,Z,S,Y`` rows."""
    Y = ens.reserves()
    fh.write("path,t,Z,S,Y\n")
    for p in range(ens.n_paths):
        for r, t in enumerate(ens.sample_times):
            fh.write(f"{p},{t!r},{ens.traj_Z[p, r]!r},{ens.traj_S[p, r]!r},{Y[p, r]!r}\n")
