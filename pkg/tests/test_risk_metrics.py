import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sysrisk.errors import DomainError, NonFiniteEnsembleError
from sysrisk.risk_metrics import (RiskEstimate, default_m, individual_default_probability,
                                  loss_distribution, systemic_risk_probability)
from sysrisk.sde_engine import PathEnsemble, simulate

from conftest import make_params


def planted(default_time, valid=None):
    n_paths, n = default_time.shape
    z = np.zeros((n_paths, n))
    valid = np.ones(n_paths, bool) if valid is None else valid
    return PathEnsemble(0.0, 1.0, n, z, z.copy(), np.isnan(default_time), default_time, valid)


def recount(default_time, lo, hi):
    out = []
    for row in default_time:
        out.append(sum(1 for t in row if t == t and lo <= t <= hi))
    return out


def toy(seed=0, n_paths=100, n=10):
    r = np.random.default_rng(seed)
    dt = r.uniform(0, 1.2, (n_paths, n))
    dt[r.uniform(size=(n_paths, n)) < 0.4] = np.nan
    dt[dt > 1.0] = np.nan
    return dt


def test_histogram_matches_hand_recount():
    dt = toy()
    ens = planted(dt)
    dist = loss_distribution(ens, (0.0, 1.0))
    expect = np.bincount(recount(dt, 0.0, 1.0), minlength=11)
    assert np.array_equal(dist.counts, expect)
    assert dist.counts.sum() == 100


def test_window_is_closed():
    dt = np.array([[0.25, 0.5, np.nan], [1.0, np.nan, np.nan]])
    ens = planted(dt)
    assert list(loss_distribution(ens, (0.25, 1.0)).counts) == [0, 1, 1, 0]
    assert list(loss_distribution(ens, (0.3, 0.99)).counts) == [1, 1, 0, 0]


def test_systemic_probability_monotone_in_M_and_equal_to_recount():
    dt = toy(1)
    ens = planted(dt)
    counts = np.array(recount(dt, 0.0, 1.0))
    prev = 1.0
    for M in range(5, 11):
        p = systemic_risk_probability(ens, (0.0, 1.0), M).probability
        assert p == np.mean(counts >= M)
        assert p <= prev
        prev = p
    with pytest.raises(DomainError):
        systemic_risk_probability(ens, (0.0, 1.0), 4)


def test_individual_probability_recount():
    dt = toy(2)
    ens = planted(dt)
    for b in (0, 9):
        assert individual_default_probability(ens, (0.0, 1.0), b).probability == \
            np.mean([(t == t) and t <= 1.0 for t in dt[:, b]])
    with pytest.raises(DomainError):
        individual_default_probability(ens, (0.0, 1.0), 10)


def test_zero_volatility_has_no_defaults():
    p = make_params(sigma_a=0.0, sigma_l=0.0)
    ens = simulate(p, None, None, 0.0, 1.0, None, 50, 1e-2, 0)
    dist = loss_distribution(ens, (0.0, 1.0))
    assert dist.counts[0] == 50
    assert systemic_risk_probability(ens, (0.0, 1.0)).probability == 0.0


def test_standard_error_and_window_errors():
    est = RiskEstimate.from_count(20, 1000)
    assert est.standard_error == pytest.approx(np.sqrt(0.02 * 0.98 / 1000))
    ens = planted(toy())
    with pytest.raises(DomainError):
        loss_distribution(ens, (0.0, 2.0))
    bad = planted(toy(), valid=np.r_[False, np.ones(99, bool)])
    with pytest.raises(NonFiniteEnsembleError):
        loss_distribution(bad, (0.0, 1.0))


def test_default_m():
    assert default_m(10) == 6
    assert default_m(11) == 6
    assert default_m(1) == 1


times = st.one_of(st.just(float("nan")), st.floats(0, 1))


@given(arrays(float, st.tuples(st.integers(1, 30), st.integers(1, 12)), elements=times),
       st.floats(0, 1), st.floats(0, 1))
def test_properties_of_histogram(dt, a, b):
    lo, hi = min(a, b), max(a, b)
    ens = planted(dt)
    dist = loss_distribution(ens, (lo, hi))
    assert dist.counts.sum() == dt.shape[0]
    assert np.array_equal(dist.counts, np.bincount(recount(dt, lo, hi), minlength=dt.shape[1] + 1))
    n = dt.shape[1]
    for M in range(n // 2, n + 1):
        if M == 0:
            continue
        assert systemic_risk_probability(ens, (lo, hi), M).probability == dist.tail_mass(M)
