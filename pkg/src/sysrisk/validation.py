"""Invariant suite: closed-form oracles, reductions and moment checks.

Each check returns a :class:`Check` with the measured value and the bound it
was held to, so failures report numbers rather than booleans.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .core_model import IdealBankPath, ModelParams, Schedule
from .lq_control import (ControlWeights, CooperationRates, RiccatiSolution, optimal_feedback,
                         rates_from_riccati, solve_riccati)
from .pseudo_mf import drift_beta, simulate_mf, simulate_pmf
from .risk_metrics import default_m, loss_distribution, systemic_risk_probability
from .sde_engine import simulate


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""
    elapsed: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} "
                f"{self.detail} ({self.elapsed:.2f}s)").replace("  ", " ")


def _identity(sol):
    return sol


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def riccati_oracle(*, backend=None, riccati_hook=_identity) -> Check:
    """``rho = 0``, ``l1 = l3 = 0.1``: ``a(0) = 0.1 tanh(1)`` and ``c = 0``."""
    w = ControlWeights.uniform(0.1)
    solve_riccati(w, 0.0, 0.0, 0.3, 0.3, backend=backend)  # compile / warm cache
    sol = riccati_hook(solve_riccati(w, 0.0, 0.0, 0.3, 0.3, backend=backend))
    err_a = abs(sol.a[0] - 0.1 * math.tanh(1.0))
    err_c = float(np.max(np.abs(sol.c)))
    ok = err_a < 1e-8 and err_c < 1e-12 and sol.elapsed < 0.1
    return Check("riccati_oracle", ok, err_a, 1e-8,
                 f"max|c|={err_c:.3g} runtime<0.1s={sol.elapsed < 0.1}", sol.elapsed)


def riccati_residuals(n_sets: int = 50, seed: int = 0, *, backend=None,
                      riccati_hook=_identity) -> Check:
    """Random admissible parameter sweep: ODE residual and RK4 step-halving ratio.

    The ratio compares ``t = 0`` coefficients at 100, 200 and 400 steps;
    fourth order gives ``|x_100 - x_200| / |x_200 - x_400|`` close to 16.
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst_res, ratios = 0.0, []
    for _ in range(n_sets):
        w = ControlWeights(*rng.uniform(0.05, 1.0, 4))
        ra, rl = rng.uniform(-0.9, 0.9, 2)
        sa, sl = rng.uniform(0.1, 1.0, 2)
        sol = riccati_hook(solve_riccati(w, ra, rl, sa, sl, backend=backend))
        worst_res = max(worst_res, float(np.max(np.abs(sol.residuals()))))
        x = [np.array(solve_riccati(w, ra, rl, sa, sl, n_steps=n, backend=backend).coefficients(0.0))
             for n in (100, 200, 400)]
        ratios.append(np.max(np.abs(x[0] - x[1])) / np.max(np.abs(x[1] - x[2])))
    elapsed = time.perf_counter() - start
    ratios = np.array(ratios)
    ok = worst_res < 1e-6 and bool(np.all(np.abs(ratios / 16 - 1) <= 0.3)) and elapsed < 10
    return Check("riccati_residuals", ok, worst_res, 1e-6,
                 f"ratio range=[{ratios.min():.3f}; {ratios.max():.3f}] runtime<10s={elapsed < 10}",
                 elapsed)


def control_round_trip(seed: int = 0, n_points: int = 100, *, backend=None) -> Check:
    """Drifts rebuilt from the extracted rates equal the feedback law."""
    rng = np.random.default_rng(seed)
    w = ControlWeights(0.1, 0.2, 0.15, 0.1)
    ra, rl = 0.4, -0.3
    sol = solve_riccati(w, ra, rl, 0.5, 0.4, backend=backend)
    rates = rates_from_riccati(sol, w, ra, rl)
    worst = 0.0
    for _ in range(n_points):
        t = float(rng.uniform(0, 1))
        i = min(int(np.searchsorted(sol.grid, t)), len(sol.grid) - 1)
        if rates.clamped_alpha[max(i - 1, 0):i + 1].any() or rates.clamped_gamma[max(i - 1, 0):i + 1].any():
            continue
        Z, S = rng.normal(0, 1, 2)
        b1, b2 = optimal_feedback(sol, w, t, Z, S)
        ba, bl = drift_beta(rates, ra, rl, t, Z, S)
        worst = max(worst, abs(b1 - ba) / max(1.0, abs(b1)), abs(b2 - bl) / max(1.0, abs(b2)))
    return Check("control_round_trip", worst < 1e-12, worst, 1e-12)


def pmf_mf_identity(seed: int = 1, *, backend=None) -> Check:
    """With ``rho = 0`` the pseudo mean-field and mean-field paths coincide bit for bit."""
    w = ControlWeights.uniform(0.1)
    rates = rates_from_riccati(solve_riccati(w, 0.0, 0.0, 0.3, 0.3, backend=backend), w, 0.0, 0.0)
    kw = dict(t0=0.0, t1=1.0, n_paths=2000, dt=1e-3, seed=seed, record_stride=50, backend=backend)
    pmf = simulate_pmf(rates, 0.0, 0.0, 0.3, 0.3, None, **kw)
    mf = simulate_mf(rates, 0.3, 0.3, None, **kw)
    mism = int(np.count_nonzero(pmf.traj_Z != mf.traj_Z) + np.count_nonzero(pmf.traj_S != mf.traj_S))
    return Check("pmf_mf_identity", mism == 0, mism, 0, "mismatched samples")


def full_correlation_replication(seed: int = 2, *, backend=None) -> Check:
    """``|rho_a| = |rho_l| = 1`` and ``g = h = 0``: all banks identical within a path."""
    c = Schedule.constant
    p = ModelParams(10, 0.1, 0.1, c(0.5), c(0.4), c(1.0, kind="correlation"),
                    c(-1.0, kind="correlation"), 0.6, 0.4)
    ens = simulate(p, CooperationRates.constant(3.0, 2.0, 0, 1), IdealBankPath.constant(0.6, 0.4, 0, 1),
                   0.0, 1.0, None, 500, 1e-3, seed, record_stride=100, backend=backend)
    spread = float(max(np.max(np.ptp(ens.traj_G, axis=2)), np.max(np.ptp(ens.traj_H, axis=2))))
    return Check("full_correlation_replication", spread == 0.0, spread, 0.0, "max within-path spread")


def gbm_mean(seed: int = 3, *, backend=None) -> Check:
    """Uncoupled GBM: sample mean of ``a_1`` against ``a0 exp(mu_a)``."""
    c = Schedule.constant
    p = ModelParams(10, 0.1, 0.1, c(0.8), c(0.6), c(0.0, kind="correlation"),
                    c(0.0, kind="correlation"), 0.1, 0.06)
    ens = simulate(p, None, None, 0.0, 1.0, None, 10_000, 1e-3, seed, gbm_drift=True,
                   detect_defaults=False, backend=backend)
    a1 = np.exp(ens.G[:, 0])
    se = a1.std(ddof=1) / math.sqrt(len(a1))
    z = abs(a1.mean() - 0.1 * math.exp(0.1)) / se
    return Check("gbm_mean", z < 3, z, 3, "standard errors")


def ou_variance(seed: int = 4, *, backend=None) -> Check:
    """Mean-field ``Z`` with constant ``alpha``: variance ``s^2 (1 - e^{-2 alpha t}) / (2 alpha)``."""
    alpha, sig = 2.0, 0.5
    ens = simulate_mf(CooperationRates.constant(alpha, alpha, 0, 1), sig, sig, None, 0.0, 1.0,
                      100_000, 1e-3, seed, backend=backend)
    Z = ens.Z
    n = len(Z)
    m = Z - Z.mean()
    var = float(np.mean(m * m)) * n / (n - 1)
    se = math.sqrt(max(float(np.mean(m ** 4)) - var * var, 0.0) / n)
    exact = sig * sig * (1 - math.exp(-2 * alpha)) / (2 * alpha)
    z = abs(var - exact) / se
    return Check("ou_variance", z < 3, z, 3, f"var={var:.6g} exact={exact:.6g}")


def noise_cross_moment(seed: int = 5, *, backend=None) -> Check:
    """``E[dW^1 dW^2] / dt`` against ``rho_a^2`` from 10^6 one-step samples."""
    c = Schedule.constant
    dt, rho = 1e-3, 0.5
    p = ModelParams(10, 0.0, 0.0, c(1.0), c(1.0), c(rho, kind="correlation"),
                    c(0.0, kind="correlation"), 1.0, 0.5)
    ens = simulate(p, None, None, 0.0, dt, None, 1_000_000, dt, seed, detect_defaults=False,
                   backend=backend)
    x = ens.G[:, 0] * ens.G[:, 1] / dt
    z = abs(x.mean() - rho * rho) / (x.std(ddof=1) / math.sqrt(len(x)))
    return Check("noise_cross_moment", z < 3, z, 3, f"mean={x.mean():.5f}")


def determinism(seeds=range(5), *, backend=None) -> Check:
    """Repeated runs per seed give identical ensembles."""
    c = Schedule.constant
    p = ModelParams(10, 0.1, 0.1, c(0.8), c(0.6), c(0.3, kind="correlation"),
                    c(0.0, kind="correlation"), 0.1, 0.06)
    rates = CooperationRates.constant(10.0, 10.0, 0, 1)
    ideal = IdealBankPath.constant(0.1, 0.06, 0, 1)
    bad = 0
    for s in seeds:
        a = simulate(p, rates, ideal, 0.0, 1.0, None, 500, 1e-3, s, backend=backend)
        b = simulate(p, rates, ideal, 0.0, 1.0, None, 500, 1e-3, s, backend=backend)
        same = (np.array_equal(a.G, b.G) and np.array_equal(a.H, b.H)
                and np.array_equal(a.default_time, b.default_time, equal_nan=True))
        bad += not same
    return Check("determinism", bad == 0, bad, 0, "seeds with differing repeats")


def systemic_equals_tail(seed: int = 6, *, backend=None) -> Check:
    """Systemic-risk probability equals the loss-distribution tail at ``M``."""
    c = Schedule.constant
    p = ModelParams(10, 0.1, 0.1, c(0.8), c(0.6), c(0.0, kind="correlation"),
                    c(0.0, kind="correlation"), 0.1, 0.06)
    ens = simulate(p, CooperationRates.constant(10.0, 10.0, 0, 1),
                   IdealBankPath.constant(0.1, 0.06, 0, 1), 0.0, 1.0, None, 2000, 1e-3, seed,
                   backend=backend)
    worst = 0.0
    dist = loss_distribution(ens, (0.0, 1.0))
    for M in range(default_m(10) - 1, 11):
        worst = max(worst, abs(systemic_risk_probability(ens, (0.0, 1.0), M).probability
                               - dist.tail_mass(M)))
    return Check("systemic_equals_tail", worst == 0.0, worst, 0.0)


def timed(check, *args, **kw) -> Check:
    """Run ``check`` and record its wall time unless it measured one itself."""
    out, elapsed = _timed(lambda: check(*args, **kw))
    return out if out.elapsed else replace(out, elapsed=elapsed)


def run_suite(*, backend=None, riccati_hook=_identity) -> list:
    """Run every check; ``riccati_hook`` may replace Riccati solutions (negative controls)."""
    rh = dict(backend=backend, riccati_hook=riccati_hook)
    b = dict(backend=backend)
    return [
        timed(riccati_oracle, **rh),
        timed(riccati_residuals, **rh),
        timed(control_round_trip, **b),
        timed(pmf_mf_identity, **b),
        timed(full_correlation_replication, **b),
        timed(gbm_mean, **b),
        timed(ou_variance, **b),
        timed(noise_cross_moment, **b),
        timed(determinism, **b),
        timed(systemic_equals_tail, **b),
    ]


def corrupt_grid(sol: RiccatiSolution, index: int | None = None, amount: float = 1e-3) -> RiccatiSolution:
    """Copy of ``sol`` with one interior value of ``a`` perturbed."""
    a = sol.a.copy()
    a[len(a) // 2 if index is None else index] += amount
    return RiccatiSolution(sol.grid, a, sol.b, sol.c, sol.d, sol.weights, sol.rho_a, sol.rho_l,
                           sol.sigma_a, sol.sigma_l, sol.elapsed)
