"""Quarterly systemic-risk governance.

At each decision time ``tau1 = j * dtau`` the authority freezes the
volatilities and correlations at their current values, solves the control
problem on the one-year window ``[tau1, tau1 + 1]``, and walks through
candidate ideal-bank paths until the estimated probability ``eta`` of a
systemic event in the window lies in ``[S1, S2]``. The chosen path and its
cooperation rates are then applied to one outer system path, which advances
one quarter under the true (possibly shocked) schedules.

Candidate ``(n_a, n_l)`` moves the ideal assets with slope ``n_a / 8`` per
year during the first quarter of the window and holds them afterwards
(liabilities likewise with ``n_l``). All candidates of one decision share
the same inner random streams, so their estimates are directly comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .core_model import IdealBankPath, ModelParams, PiecewiseLinear
from .errors import DomainError, InfeasibleCandidateError, NonFiniteEnsembleError
from .lq_control import ControlWeights, CooperationRates, rates_from_riccati, solve_riccati
from .risk_metrics import RiskEstimate, default_counts, default_m
from .sde_engine import SystemState, simulate

STRATEGY_SETS = ("1a2a3", "1a2b3", "1b2b3")
MAX_STEP = 8

# (strategy label, n_a sign, n_l sign) for the raising and lowering walks
_RAISE = {"1a": (1, 0), "1b": (0, -1)}
_LOWER = {"2a": (-1, 0), "2b": (0, 1)}


def parse_strategy_set(s: str) -> tuple:
    """Normalize e.g. ``"1a, 2b, 3"`` to ``"1a2b3"`` and return (raise, lower) labels."""
    key = "".join(ch for ch in str(s).lower() if ch.isalnum())
    if key not in STRATEGY_SETS:
        raise DomainError(f"strategy set must be one of {STRATEGY_SETS}, got {s!r}")
    return key, key[0:2], key[2:4]


@dataclass(frozen=True)
class GovernanceScenario:
    params: ModelParams
    weights: ControlWeights
    S1: float = 0.01
    S2: float = 0.05
    horizon: float = 3.0
    dtau: float = 0.25
    window: float = 1.0
    strategy_set: str = "1a2a3"
    n_inner: int = 2000
    dt: float = 1e-3
    seed: int = 0
    phi0: float = 0.6
    psi0: float = 0.4
    riccati_steps: int = 10_000
    baseline_alpha: float = 10.0
    baseline_gamma: float = 10.0

    def __post_init__(self):
        if not 0 < self.S1 < self.S2 < 1:
            raise DomainError("thresholds must satisfy 0 < S1 < S2 < 1")
        if not (self.dtau > 0 and self.window > 0 and self.horizon >= self.window):
            raise DomainError("need dtau > 0, window > 0 and horizon >= window")
        steps = (self.horizon - self.window) / self.dtau
        if abs(steps - round(steps)) > 1e-9:
            raise DomainError("dtau must divide horizon - window")
        if self.window < self.dtau:
            raise DomainError("window must be at least one decision step")
        object.__setattr__(self, "strategy_set", parse_strategy_set(self.strategy_set)[0])
        if self.n_inner < 1:
            raise DomainError("n_inner must be positive")
        IdealBankPath.constant(self.phi0, self.psi0, 0.0, 1.0)

    @property
    def n_decisions(self) -> int:
        return int(round((self.horizon - self.window) / self.dtau)) + 1

    def decision_time(self, j: int) -> float:
        return j * self.dtau

    @property
    def M(self) -> int:
        return default_m(self.params.n_banks)


@dataclass(frozen=True)
class CandidateResult:
    n_a: int
    n_l: int
    strategy: str
    eta: RiskEstimate | None
    feasible: bool
    counts: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class QuarterDecision:
    j: int
    n_a: int
    n_l: int
    strategy: str
    eta: RiskEstimate
    mean_alpha: float
    mean_gamma: float
    cost: float
    satisfied: bool
    candidates: tuple = field(default=(), compare=False, repr=False)


@dataclass
class GovernanceRecord:
    decisions: list
    truncated: bool = False
    label: str = "governance"

    @property
    def indices(self) -> tuple:
        return performance_indices(self)


def candidate_assets(j: int, n_a: int, phi_start: float, dtau: float = 0.25,
                     window: float = 1.0) -> PiecewiseLinear:
    """Ramp with slope ``n_a / 8`` on ``[tau1, tau1 + dtau]``, constant after."""
    if int(n_a) != n_a or abs(n_a) > MAX_STEP:
        raise DomainError(f"n_a must be an integer in [-8, 8], got {n_a}")
    if not phi_start > 0:
        raise DomainError("phi_start must be positive")
    t1 = j * dtau
    end = n_a / MAX_STEP * dtau + phi_start
    if not end > 0:
        raise InfeasibleCandidateError(f"ideal assets reach {end} <= 0 for n_a = {n_a}")
    return PiecewiseLinear((t1, t1 + dtau, t1 + window), (phi_start, end, end))


def candidate_liabilities(j: int, n_l: int, psi_start: float, dtau: float = 0.25,
                          window: float = 1.0) -> PiecewiseLinear:
    if int(n_l) != n_l or abs(n_l) > MAX_STEP:
        raise DomainError(f"n_l must be an integer in [-8, 8], got {n_l}")
    if not psi_start > 0:
        raise DomainError("psi_start must be positive")
    t1 = j * dtau
    end = n_l / MAX_STEP * dtau + psi_start
    if not end > 0:
        raise InfeasibleCandidateError(f"ideal liabilities reach {end} <= 0 for n_l = {n_l}")
    return PiecewiseLinear((t1, t1 + dtau, t1 + window), (psi_start, end, end))


def candidate_pair(j: int, n_a: int, n_l: int, phi_start: float, psi_start: float,
                   dtau: float = 0.25, window: float = 1.0) -> IdealBankPath:
    """Ideal path for the pair; raises InfeasibleCandidateError when ``phi - psi <= 0``."""
    phi = candidate_assets(j, n_a, phi_start, dtau, window)
    psi = candidate_liabilities(j, n_l, psi_start, dtau, window)
    try:
        return IdealBankPath(phi, psi)
    except InfeasibleCandidateError:
        raise
    except DomainError as exc:
        raise InfeasibleCandidateError(str(exc)) from None


def candidate_cost(n_a: int, n_l: int) -> float:
    return abs(n_a) / MAX_STEP + abs(n_l) / MAX_STEP


def decision_rates(scn: GovernanceScenario, tau1: float) -> CooperationRates:
    """Optimal rates for the window starting at ``tau1`` (frozen coefficients)."""
    p = scn.params
    ra, rl = p.rho_a(tau1), p.rho_l(tau1)
    sol = solve_riccati(scn.weights, ra, rl, p.sigma_a(tau1), p.sigma_l(tau1),
                        scn.window, scn.riccati_steps)
    return rates_from_riccati(sol, scn.weights, ra, rl).shifted(tau1)


def window_state(state: SystemState, params: ModelParams) -> SystemState:
    """Initial state of an inner simulation.

    With retained failed banks every bank is at risk again in the new window
    (a default is a first passage below ``D`` inside the window). With removed
    banks the outer defaults carry over and those banks are not counted.
    """
    if params.failed_banks == "retain":
        return state.reopened(params.default_level)
    return state


def evaluate_candidate(state: SystemState, scn: GovernanceScenario, pair: tuple, *, j: int,
                       rates: CooperationRates, phi_start: float, psi_start: float,
                       stream=None, backend: str | None = None) -> tuple:
    """Estimate ``eta`` for one candidate from ``state`` at ``tau1``.

    Returns ``(RiskEstimate, per-path default counts)``. The inner
    simulation uses the coefficients frozen at ``tau1`` and the stream
    ``(TAG_INNER, j)`` shared by every candidate of the decision.
    """
    tau1 = scn.decision_time(j)
    tau2 = tau1 + scn.window
    ideal = candidate_pair(j, pair[0], pair[1], phi_start, psi_start, scn.dtau, scn.window)
    frozen = scn.params.frozen(tau1)
    stream = (_rng.TAG_INNER, j) if stream is None else stream
    ens = simulate(frozen, rates, ideal, tau1, tau2, window_state(state, scn.params),
                   scn.n_inner, scn.dt, scn.seed, stream=stream, backend=backend)
    counts = default_counts(ens, (tau1, tau2))
    est = RiskEstimate.from_count(int(np.count_nonzero(counts >= scn.M)), ens.n_paths)
    return est, counts


def _distance(p: float, lo: float, hi: float) -> float:
    return lo - p if p < lo else (p - hi if p > hi else 0.0)


def decide(j: int, state: SystemState, scn: GovernanceScenario, *, rates: CooperationRates,
           phi_start: float, psi_start: float, keep_counts: bool = False,
           backend: str | None = None) -> QuarterDecision:
    """Choose the ideal-bank move for quarter ``j``.

    Evaluates the hold pair ``(0, 0)`` first. Above ``S2`` it walks the
    raising strategy (1a: ``n_a = 1..8``; 1b: ``n_l = -1..-8``), below ``S1``
    the lowering one (2a: ``n_a = -1..-8``; 2b: ``n_l = 1..8``), stopping at
    the first estimate inside ``[S1, S2]``. If none qualifies the evaluated
    pair closest to the band is taken (the furthest along the walk among
    equally close ones) and the decision is marked unsatisfied.
    Infeasible pairs are skipped.
    """
    _, raise_lbl, lower_lbl = parse_strategy_set(scn.strategy_set)
    evaluated = []

    def run(n_a, n_l, label):
        try:
            est, counts = evaluate_candidate(state, scn, (n_a, n_l), j=j, rates=rates,
                                             phi_start=phi_start, psi_start=psi_start,
                                             backend=backend)
        except InfeasibleCandidateError:
            evaluated.append(CandidateResult(n_a, n_l, label, None, False))
            return None
        evaluated.append(CandidateResult(n_a, n_l, label, est, True,
                                         counts if keep_counts else None))
        return est

    est = run(0, 0, "3")
    chosen = None
    if est is not None and scn.S1 <= est.probability <= scn.S2:
        chosen = evaluated[-1]
    else:
        if est is None or est.probability > scn.S2:
            label, (sa, sl) = raise_lbl, _RAISE[raise_lbl]
        else:
            label, (sa, sl) = lower_lbl, _LOWER[lower_lbl]
        for k in range(1, MAX_STEP + 1):
            e = run(sa * k, sl * k, label)
            if e is not None and scn.S1 <= e.probability <= scn.S2:
                chosen = evaluated[-1]
                break
    satisfied = chosen is not None
    if chosen is None:
        feasible = [c for c in evaluated if c.feasible]
        if not feasible:
            raise InfeasibleCandidateError(f"no feasible candidate at decision {j}")
        # ties (typically several estimates of exactly 0) go to the candidate
        # furthest along the walk, the one expected to be closest to the band
        best = min(_distance(c.eta.probability, scn.S1, scn.S2) for c in feasible)
        chosen = [c for c in feasible if _distance(c.eta.probability, scn.S1, scn.S2) == best][-1]
    length = scn.window
    return QuarterDecision(j, chosen.n_a, chosen.n_l, chosen.strategy, chosen.eta,
                           rates.window_mean("alpha", length), rates.window_mean("gamma", length),
                           candidate_cost(chosen.n_a, chosen.n_l), satisfied, tuple(evaluated))


def _advance(scn: GovernanceScenario, state: SystemState, rates, ideal, j: int, stream,
             backend) -> SystemState:
    tau1 = scn.decision_time(j)
    ens = simulate(scn.params, rates, ideal, tau1, tau1 + scn.dtau, state, 1, scn.dt, scn.seed,
                   stream=stream, backend=backend)
    if ens.n_invalid:
        raise NonFiniteEnsembleError(f"outer path overflowed during quarter {j}")
    return ens.state(0)


def _all_removed(scn, state) -> bool:
    return scn.params.failed_banks == "remove" and not state.alive.any()


def run_governance(scn: GovernanceScenario, *, keep_counts: bool = False,
                   backend: str | None = None) -> GovernanceRecord:
    """Run all quarterly decisions along one outer path."""
    state = SystemState.initial(scn.params, 0.0)
    phi_s, psi_s = scn.phi0, scn.psi0
    decisions = []
    truncated = False
    for j in range(scn.n_decisions):
        tau1 = scn.decision_time(j)
        rates = decision_rates(scn, tau1)
        d = decide(j, state, scn, rates=rates, phi_start=phi_s, psi_start=psi_s,
                   keep_counts=keep_counts, backend=backend)
        decisions.append(d)
        ideal = candidate_pair(j, d.n_a, d.n_l, phi_s, psi_s, scn.dtau, scn.window)
        state = _advance(scn, state, rates, ideal, j, (_rng.TAG_OUTER, j), backend)
        state.t = tau1 + scn.dtau
        phi_s, psi_s = ideal.phi.value(state.t), ideal.psi.value(state.t)
        if _all_removed(scn, state) and j + 1 < scn.n_decisions:
            truncated = True
            break
    return GovernanceRecord(decisions, truncated, "governance")


def run_baseline(scn: GovernanceScenario, *, backend: str | None = None) -> GovernanceRecord:
    """No governance: constant rates and ideal path, ``eta`` estimated each quarter."""
    state = SystemState.initial(scn.params, 0.0)
    decisions = []
    truncated = False
    for j in range(scn.n_decisions):
        tau1 = scn.decision_time(j)
        tau2 = tau1 + scn.window
        rates = CooperationRates.constant(scn.baseline_alpha, scn.baseline_gamma, tau1, tau2)
        ideal = IdealBankPath.constant(scn.phi0, scn.psi0, tau1, tau2)
        ens = simulate(scn.params.frozen(tau1), rates, ideal, tau1, tau2,
                       window_state(state, scn.params), scn.n_inner,
                       scn.dt, scn.seed, stream=(_rng.TAG_BASELINE, _rng.TAG_INNER, j),
                       backend=backend)
        counts = default_counts(ens, (tau1, tau2))
        est = RiskEstimate.from_count(int(np.count_nonzero(counts >= scn.M)), ens.n_paths)
        decisions.append(QuarterDecision(
            j, 0, 0, "none", est, rates.window_mean("alpha", scn.window),
            rates.window_mean("gamma", scn.window), 0.0, scn.S1 <= est.probability <= scn.S2))
        state = _advance(scn, state, rates, ideal, j, (_rng.TAG_BASELINE, _rng.TAG_OUTER, j),
                         backend)
        state.t = tau1 + scn.dtau
        if _all_removed(scn, state) and j + 1 < scn.n_decisions:
            truncated = True
            break
    return GovernanceRecord(decisions, truncated, "baseline")


def performance_indices(record) -> tuple:
    """``(N_SR, C_c, C_alpha, C_gamma)``: norm of the etas and summed costs."""
    decisions = record.decisions if hasattr(record, "decisions") else record
    etas = [d.eta.probability for d in decisions]
    n_sr = math.sqrt(math.fsum(e * e for e in etas))
    c_c = math.fsum(d.cost for d in decisions)
    c_a = math.fsum(d.mean_alpha for d in decisions)
    c_g = math.fsum(d.mean_gamma for d in decisions)
    return n_sr, c_c, c_a, c_g


@dataclass(frozen=True)
class MultiSeedSummary:
    seeds: tuple
    indices: np.ndarray  # (n_seeds, 4)

    @property
    def mean(self) -> np.ndarray:
        return self.indices.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        if len(self.seeds) < 2:
            return np.zeros(4)
        return self.indices.std(axis=0, ddof=1)


def run_many(scn: GovernanceScenario, seeds, *, baseline: bool = False,
             backend: str | None = None) -> tuple:
    """Run one record per seed; returns ``(records, MultiSeedSummary)``."""
    records = []
    for s in seeds:
        sc = replace(scn, seed=int(s))
        records.append(run_baseline(sc, backend=backend) if baseline
                       else run_governance(sc, backend=backend))
    idx = np.array([performance_indices(r) for r in records])
    return records, MultiSeedSummary(tuple(int(s) for s in seeds), idx)
