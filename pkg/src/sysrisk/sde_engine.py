"""Euler-Maruyama Monte Carlo for the N-bank log-asset / log-liability system.

For every participating bank ``i`` one step of length ``dt`` reads::

    G_i += (alpha/N) sum_k (G_k - G_i) dt + dln(phi)/dt dt + sigma_a dW_i
    H_i += (gamma/N) sum_k (H_k - H_i) dt + dln(psi)/dt dt + sigma_l dZ_i

where ``k`` runs over the participating banks.

with ``dW_i = rho_a sqrt(dt) xi_0 + sqrt(1 - rho_a^2) sqrt(dt) xi_i`` (and an
independent common factor for ``dZ``). A bank defaults the first time
``exp(G_i) - exp(H_i) < D`` on the step grid.
All coefficients are evaluated at the left end of each step.

By default a failed bank keeps evolving and keeps participating (the sums run
over all ``N`` banks); ``ModelParams.failed_banks = "remove"`` freezes it
and restricts the sums to the alive banks instead. The normalizer is ``N``
in both cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .core_model import IdealBankPath, ModelParams, eval_ideal, eval_schedule, is_default
from .errors import DomainError, NonFiniteEnsembleError
from .kernels import default_backend, get_kernels
from .lq_control import CooperationRates


@dataclass
class SystemState:
    t: float
    G: np.ndarray
    H: np.ndarray
    alive: np.ndarray
    default_time: np.ndarray

    @classmethod
    def initial(cls, params: ModelParams, t: float = 0.0) -> "SystemState":
        n = params.n_banks
        return cls(float(t), np.full(n, math.log(params.a0)), np.full(n, math.log(params.l0)),
                   np.ones(n, dtype=bool), np.full(n, np.nan))

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        self.alive = np.asarray(self.alive, dtype=bool)
        self.default_time = np.asarray(self.default_time, dtype=float)
        if not self.G.shape == self.H.shape == self.alive.shape == self.default_time.shape:
            raise DomainError("state arrays must share one shape")
        dead = ~self.alive
        if np.any(np.isnan(self.default_time[dead])) or np.any(self.default_time[dead] > self.t):
            raise DomainError("dead banks need a default time no later than t")

    @property
    def n_banks(self) -> int:
        return self.G.shape[0]

    def reserves(self) -> np.ndarray:
        return np.exp(self.G) - np.exp(self.H)

    def reopened(self, level: float) -> "SystemState":
        """State for a new observation window starting at ``t``.

        Every bank is back at risk; those whose reserves are already below
        ``level`` count as defaulting at ``t``. Used when failed banks are
        retained, where a default is a first passage inside each window.
        """
        hit = is_default(self.G, self.H, level)
        return SystemState(self.t, self.G.copy(), self.H.copy(), ~hit,
                           np.where(hit, self.t, np.nan))

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.G.copy(), self.H.copy(), self.alive.copy(),
                           self.default_time.copy())


@dataclass(frozen=True)
class NoiseBlock:
    dW: np.ndarray
    dZ: np.ndarray


def draw_noise(rho_a: float, rho_l: float, n: int, dt: float, rng, size=None) -> NoiseBlock:
    """Correlated Brownian increments for one step.

    ``rng`` is anything with a ``standard_normal(shape)`` method. Normals are
    taken in the engine's slot order (common asset factor, ``n`` asset
    idiosyncratic, common liability factor, ``n`` liability idiosyncratic),
    so a :class:`~sysrisk.rng.CounterStream` reproduces the kernel's draws.
    ``size`` prepends a batch dimension.
    """
    if not abs(rho_a) <= 1 or not abs(rho_l) <= 1:
        raise DomainError("correlations must satisfy |rho| <= 1")
    if not dt > 0:
        raise DomainError("dt must be positive")
    shape = (2 * n + 2,) if size is None else (int(size), 2 * n + 2)
    xi = rng.standard_normal(shape)
    sq = math.sqrt(dt)
    ac, ai = rho_a * sq, math.sqrt(1 - rho_a * rho_a) * sq
    lc, li = rho_l * sq, math.sqrt(1 - rho_l * rho_l) * sq
    dW = ac * xi[..., 0:1] + ai * xi[..., 1:n + 1]
    dZ = lc * xi[..., n + 1:n + 2] + li * xi[..., n + 2:]
    return NoiseBlock(dW, dZ)


def _rates_at(rates, t):
    if rates is None:
        return 0.0, 0.0
    a, g, _, _ = rates.at(t)
    return a, g


def euler_step(state: SystemState, params: ModelParams, rates: CooperationRates | None,
               ideal: IdealBankPath | None, dt: float, noise: NoiseBlock, *,
               gbm_drift: bool = False, detect_defaults: bool = True) -> SystemState:
    """Scalar reference step; the kernels implement the same update.

    Sums are accumulated as ``sum_k (G_k - G_ref)`` with ``G_ref`` the first
    participating bank, which makes them exactly zero for identical banks.
    """
    t = state.t
    n = params.n_banks
    alpha, gamma = _rates_at(rates, t)
    sa, sl = eval_schedule(params.sigma_a, t), eval_schedule(params.sigma_l, t)
    da = dl = 0.0
    if ideal is not None:
        _, _, da, dl = eval_ideal(ideal, t)
    if gbm_drift:
        da += params.mu_a - 0.5 * sa * sa
        dl += params.mu_l - 0.5 * sl * sl
    G, H = state.G.copy(), state.H.copy()
    alive = state.alive.copy()
    dtime = state.default_time.copy()
    idx = np.arange(n) if params.failed_banks == "retain" else np.flatnonzero(alive)
    if idx.size:
        ref_g, ref_h = state.G[idx[0]], state.H[idx[0]]
        sg = sh = 0.0
        for k in idx:
            sg = sg + (state.G[k] - ref_g)
            sh = sh + (state.H[k] - ref_h)
        na = float(idx.size)
        for i in idx:
            coop_g = (alpha / n) * (sg - na * (state.G[i] - ref_g))
            coop_h = (gamma / n) * (sh - na * (state.H[i] - ref_h))
            G[i] = state.G[i] + coop_g * dt + da * dt + sa * noise.dW[i]
            H[i] = state.H[i] + coop_h * dt + dl * dt + sl * noise.dZ[i]
    t_new = t + dt
    if detect_defaults:
        hit = alive & is_default(G, H, params.default_level)
        alive &= ~hit
        dtime[hit] = t_new
    return SystemState(t_new, G, H, alive, dtime)


@dataclass
class PathEnsemble:
    """Result of :func:`simulate`.

    Arrays have a leading path axis. ``default_time`` is NaN for banks that
    did not default during the run; banks already dead in the initial state
    keep their earlier default time.
    """

    t0: float
    t1: float
    n_banks: int
    G: np.ndarray
    H: np.ndarray
    alive: np.ndarray
    default_time: np.ndarray
    valid: np.ndarray
    sample_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    traj_G: np.ndarray | None = None
    traj_H: np.ndarray | None = None
    initial_alive: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.G.shape[0]

    @property
    def n_invalid(self) -> int:
        return int(np.count_nonzero(~self.valid))

    def require_valid(self):
        if self.n_invalid:
            raise NonFiniteEnsembleError(
                f"{self.n_invalid} of {self.n_paths} paths overflowed to non-finite values")

    def state(self, p: int) -> SystemState:
        return SystemState(self.t1, self.G[p], self.H[p], self.alive[p], self.default_time[p])


def step_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Uniform grid with exact endpoints; ``dt`` must divide ``t1 - t0``."""
    if not t1 > t0:
        raise DomainError("t1 must exceed t0")
    if not dt > 0:
        raise DomainError("dt must be positive")
    span = t1 - t0
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9 * max(span, dt):
        raise DomainError(f"dt = {dt} does not divide the interval length {span}")
    return np.linspace(t0, t1, n + 1)


def step_coefficients(params: ModelParams, rates, ideal, times, *, gbm_drift=False) -> dict:
    """Per-step coefficient arrays (left endpoints) shared by both backends."""
    tl = times[:-1]
    n = params.n_banks
    dt = (times[-1] - times[0]) / (len(times) - 1)
    sq = math.sqrt(dt)
    sa = params.sigma_a.on_grid(tl)
    sl = params.sigma_l.on_grid(tl)
    ra = params.rho_a.on_grid(tl)
    rl = params.rho_l.on_grid(tl)
    if rates is None:
        alpha = gamma = np.zeros_like(tl)
    else:
        alpha, gamma, _, _ = rates.on_grid(tl)
    if ideal is None:
        da = np.zeros_like(tl)
        dl = np.zeros_like(tl)
    else:
        lo, hi = ideal.domain
        if times[0] < lo - 1e-12 or times[-1] > hi + 1e-12:
            raise DomainError(f"ideal path domain [{lo}, {hi}] does not cover the run")
        da, dl = ideal.dlog_on_grid(np.clip(tl, lo, hi))
    if gbm_drift:
        da = da + (params.mu_a - 0.5 * sa * sa)
        dl = dl + (params.mu_l - 0.5 * sl * sl)
    return dict(ca=alpha / n, cg=gamma / n, drift_a=np.ascontiguousarray(da, dtype=float),
                drift_l=np.ascontiguousarray(dl, dtype=float), sig_a=sa, sig_l=sl,
                ra_c=ra * sq, ra_i=np.sqrt(1 - ra * ra) * sq,
                rl_c=rl * sq, rl_i=np.sqrt(1 - rl * rl) * sq)


def record_indices(n_steps: int, stride: int) -> np.ndarray:
    if stride <= 0:
        return np.empty(0, dtype=np.int64)
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx, dtype=np.int64)


def stream_key(seed: int, stream=(_rng.TAG_PATHS,)) -> int:
    return _rng.derive_key(int(seed), *stream)


def simulate(params: ModelParams, rates: CooperationRates | None, ideal: IdealBankPath | None,
             t0: float, t1: float, initial: SystemState | None, n_paths: int, dt: float,
             seed: int, *, stream=(_rng.TAG_PATHS,), gbm_drift: bool = False,
             detect_defaults: bool = True, record_stride: int = 0,
             backend: str | None = None) -> PathEnsemble:
    """Simulate ``n_paths`` independent paths of the system on ``[t0, t1]``.

    Path ``p`` draws its normals from the counter stream
    ``(derive_key(seed, *stream), p)``, so results do not depend on the
    number of worker threads or on which other paths are simulated.

    Parameters
    ----------
    rates : CooperationRates or None
        ``None`` switches the cooperation drift off.
    ideal : IdealBankPath or None
        ``None`` switches the ideal-bank drift off.
    initial : SystemState or None
        Start state at ``t0``; ``None`` starts every bank at ``(ln a0, ln l0)``.
    gbm_drift : bool
        Add ``mu - sigma^2/2`` to the log drifts (uncoupled geometric
        Brownian motion form).
    record_stride : int
        Record ``G, H`` every ``record_stride`` steps (0 disables).
    """
    if n_paths < 0:
        raise DomainError("n_paths must be nonnegative")
    times = step_grid(t0, t1, dt)
    n_steps = len(times) - 1
    if initial is None:
        initial = SystemState.initial(params, t0)
    if abs(initial.t - t0) > 1e-12 * max(1.0, abs(t0)):
        raise DomainError(f"initial state is at t = {initial.t}, expected {t0}")
    if initial.n_banks != params.n_banks:
        raise DomainError("initial state has the wrong number of banks")
    coef = step_coefficients(params, rates, ideal, times, gbm_drift=gbm_drift)
    rec = record_indices(n_steps, record_stride)
    n = params.n_banks
    if n_paths == 0:
        empty = np.empty((0, n))
        return PathEnsemble(t0, t1, n, empty, empty.copy(), np.empty((0, n), bool), empty.copy(),
                            np.empty(0, bool), times[rec], np.empty((0, len(rec), n)),
                            np.empty((0, len(rec), n)), initial.alive.copy())
    k = get_kernels(backend)
    key = np.uint64(stream_key(seed, stream))
    G, H, alive, dtime, valid, trG, trH = k.simulate_system(
        initial.G, initial.H, initial.alive, int(n_paths), key, times,
        coef["ca"], coef["cg"], coef["drift_a"], coef["drift_l"], coef["sig_a"], coef["sig_l"],
        coef["ra_c"], coef["ra_i"], coef["rl_c"], coef["rl_i"], float(params.default_level),
        bool(detect_defaults), params.failed_banks == "retain", rec)
    earlier = ~initial.alive
    if earlier.any():
        dtime[:, earlier] = initial.default_time[earlier]
    return PathEnsemble(t0, t1, n, G, H, alive, dtime, valid, times[rec],
                        trG if len(rec) else None, trH if len(rec) else None,
                        initial.alive.copy())


def write_trajectories(ens: PathEnsemble, fh) -> None:
    """Write recorded samples as ``path,t,bank,G,H,c`` rows."""
    if ens.traj_G is None:
        raise DomainError("ensemble has no recorded trajectories (record_stride was 0)")
    fh.write("path,t,bank,G,H,c\n")
    for p in range(ens.n_paths):
        for r, t in enumerate(ens.sample_times):
            for i in range(ens.n_banks):
                g, h = ens.traj_G[p, r, i], ens.traj_H[p, r, i]
                fh.write(f"{p},{t!r},{i},{g!r},{h!r},{math.exp(g) - math.exp(h)!r}\n")


__all__ = ["SystemState", "NoiseBlock", "PathEnsemble", "draw_noise", "euler_step", "simulate",
           "step_grid", "step_coefficients", "write_trajectories", "default_backend"]
