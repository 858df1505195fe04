import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sysrisk import rng
from sysrisk.core_model import IdealBankPath, PiecewiseLinear, Schedule
from sysrisk.errors import DomainError, NonFiniteEnsembleError
from sysrisk.kernels import set_threads
from sysrisk.lq_control import CooperationRates
from sysrisk.sde_engine import (SystemState, draw_noise, euler_step, simulate, step_grid,
                                stream_key, write_trajectories)

from conftest import make_params


def reference_path(params, rates, ideal, t0, t1, dt, seed, path, *, gbm_drift=False, initial=None):
    """Scalar replay of one kernel path through ``euler_step``."""
    state = initial or SystemState.initial(params, t0)
    s = rng.CounterStream(stream_key(seed), path)
    n_steps = int(round((t1 - t0) / dt))
    times = np.linspace(t0, t1, n_steps + 1)
    for k in range(n_steps):
        state.t = times[k]
        ra, rl = params.rho_a(times[k]), params.rho_l(times[k])
        noise = draw_noise(ra, rl, params.n_banks, times[k + 1] - times[k], s)
        state = euler_step(state, params, rates, ideal, (t1 - t0) / n_steps, noise,
                           gbm_drift=gbm_drift)
    return state


@pytest.mark.parametrize("mode", ["retain", "remove"])
@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_kernel_matches_reference_step(mode, backend):
    p = make_params(n=4, sigma_a=1.5, sigma_l=0.9, rho_a=0.4, rho_l=0.2, failed_banks=mode)
    rates = CooperationRates.constant(5.0, 3.0, 0.0, 0.2)
    ideal = IdealBankPath(PiecewiseLinear((0, 0.2), (0.1, 0.12)), PiecewiseLinear.constant(0.06, 0, 0.2))
    ens = simulate(p, rates, ideal, 0.0, 0.2, None, 6, 1e-3, 11, backend=backend)
    for path in range(6):
        ref = reference_path(p, rates, ideal, 0.0, 0.2, 1e-3, 11, path)
        assert np.allclose(ens.G[path], ref.G, rtol=0, atol=1e-12)
        assert np.allclose(ens.H[path], ref.H, rtol=0, atol=1e-12)
        assert np.array_equal(ens.alive[path], ref.alive)
        assert np.allclose(ens.default_time[path], ref.default_time, equal_nan=True)


def test_backends_agree_to_rounding(fig1_params, coupled):
    rates, ideal = coupled
    a = simulate(fig1_params, rates, ideal, 0.0, 1.0, None, 200, 1e-3, 3, backend="numba")
    b = simulate(fig1_params, rates, ideal, 0.0, 1.0, None, 200, 1e-3, 3, backend="numpy")
    assert np.max(np.abs(a.G - b.G)) < 1e-11
    assert np.array_equal(a.alive, b.alive)


def test_paths_do_not_depend_on_ensemble_size_or_threads(fig1_params, coupled):
    rates, ideal = coupled
    big = simulate(fig1_params, rates, ideal, 0.0, 0.5, None, 64, 1e-3, 9)
    small = simulate(fig1_params, rates, ideal, 0.0, 0.5, None, 16, 1e-3, 9)
    assert np.array_equal(big.G[:16], small.G)
    before = set_threads(1)
    try:
        one = simulate(fig1_params, rates, ideal, 0.0, 0.5, None, 64, 1e-3, 9)
    finally:
        set_threads(before)
    assert np.array_equal(big.G, one.G)


def test_retained_banks_keep_moving_removed_banks_freeze(coupled):
    rates, ideal = coupled
    out = {}
    for mode in ("retain", "remove"):
        p = make_params(sigma_a=1.2, failed_banks=mode)
        out[mode] = simulate(p, rates, ideal, 0.0, 1.0, None, 200, 1e-3, 5, record_stride=10)
    rem = out["remove"]
    p_idx, b_idx = np.nonzero(~rem.alive)
    assert len(p_idx) > 0
    for p, b in zip(p_idx[:20], b_idx[:20]):
        k = int(np.searchsorted(rem.sample_times, rem.default_time[p, b] + 1e-12))
        assert np.all(rem.traj_G[p, k:, b] == rem.traj_G[p, k, b])
    ret = out["retain"]
    p, b = np.argwhere(~ret.alive)[0]
    k = int(np.searchsorted(ret.sample_times, ret.default_time[p, b] + 1e-12))
    assert len(np.unique(ret.traj_G[p, k:, b])) > 1


def test_cooperation_preserves_cross_bank_mean():
    p = make_params(sigma_a=0.8, rho_a=0.3)
    a = simulate(p, None, None, 0.0, 1.0, None, 50, 1e-3, 4, detect_defaults=False)
    b = simulate(p, CooperationRates.constant(8.0, 4.0, 0, 1), None, 0.0, 1.0, None, 50, 1e-3, 4,
                 detect_defaults=False)
    assert np.allclose(a.G.mean(axis=1), b.G.mean(axis=1), atol=1e-12)
    assert b.G.std(axis=1).mean() < a.G.std(axis=1).mean()


@settings(max_examples=15)
@given(st.floats(-0.2, 0.3), st.floats(0.01, 2.0), st.floats(0.1, 5.0))
def test_zero_volatility_is_deterministic_drift(mu, a0, t1):
    p = make_params(n=3, sigma_a=0.0, sigma_l=0.0, a0=a0, l0=a0 / 2)
    p = type(p)(3, mu, mu, p.sigma_a, p.sigma_l, p.rho_a, p.rho_l, a0, a0 / 2)
    t1 = round(t1, 2)
    ens = simulate(p, CooperationRates.constant(5.0, 5.0, 0, t1), None, 0.0, t1, None, 2, 0.01, 0,
                   gbm_drift=True)
    assert np.allclose(ens.G, math.log(a0) + mu * t1, atol=1e-10)
    assert ens.alive.all()


@settings(max_examples=10)
@given(st.sampled_from([1.0, -1.0]), st.sampled_from([1.0, -1.0]), st.integers(0, 2**32))
def test_full_correlation_makes_banks_identical(ra, rl, seed):
    p = make_params(sigma_a=0.5, sigma_l=0.4, rho_a=ra, rho_l=rl, a0=0.6, l0=0.4)
    ens = simulate(p, CooperationRates.constant(3.0, 2.0, 0, 1), IdealBankPath.constant(0.6, 0.4, 0, 1),
                   0.0, 1.0, None, 20, 1e-2, seed, record_stride=5)
    assert np.all(ens.traj_G == ens.traj_G[:, :, :1])
    assert np.all(ens.traj_H == ens.traj_H[:, :, :1])


def test_dead_banks_in_initial_state_keep_default_time(fig1_params):
    G = np.full(10, math.log(0.1))
    H = np.full(10, math.log(0.06))
    alive = np.ones(10, bool)
    alive[3] = False
    dt_ = np.full(10, np.nan)
    dt_[3] = 0.1
    st0 = SystemState(0.25, G, H, alive, dt_)
    ens = simulate(fig1_params, None, None, 0.25, 0.5, st0, 10, 1e-3, 1)
    assert np.all(ens.default_time[:, 3] == 0.1)


def test_overflow_is_reported():
    p = make_params(sigma_a=0.1)
    ens = simulate(p, CooperationRates.constant(1e308, 0.0, 0, 1), None, 0.0, 0.01, None, 3, 1e-3, 0)
    assert ens.n_invalid > 0
    with pytest.raises(NonFiniteEnsembleError):
        ens.require_valid()


def test_step_grid_rejects_non_dividing_dt():
    with pytest.raises(DomainError):
        step_grid(0.0, 1.0, 0.3)
    g = step_grid(0.25, 1.25, 1e-3)
    assert g[0] == 0.25 and g[-1] == 1.25 and len(g) == 1001


def test_noise_block_covariance(rng):
    nb = draw_noise(0.5, 0.3, 3, 1e-2, rng, size=200_000)
    c = np.mean(nb.dW[:, 0] * nb.dW[:, 1]) / 1e-2
    assert abs(c - 0.25) < 0.02
    assert abs(np.mean(nb.dZ[:, 0] * nb.dZ[:, 2]) / 1e-2 - 0.09) < 0.02
    assert abs(np.mean(nb.dW[:, 0] * nb.dZ[:, 0])) / 1e-2 < 0.02


def test_write_trajectories(fig1_params, tmp_path):
    ens = simulate(fig1_params, None, None, 0.0, 0.01, None, 2, 1e-3, 0, record_stride=5)
    path = tmp_path / "traj.csv"
    with open(path, "w") as fh:
        write_trajectories(ens, fh)
    lines = path.read_text().splitlines()
    assert lines[0] == "path,t,bank,G,H,c"
    assert len(lines) == 1 + 2 * 3 * 10
