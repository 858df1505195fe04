"""Parameter containers, time schedules and solvency primitives."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

FAILED_BANK_MODES = ("retain", "remove")


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant function of time.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])`` and the last
    value extends to infinity, so the function is right-continuous: the new
    value takes effect at the jump time itself.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing segment start times (years).
    values : sequence of float
        One value per segment.
    kind : {"volatility", "correlation", "any"}
        Volatilities must be positive, correlations lie in [-1, 1].
    """

    breakpoints: tuple
    values: tuple
    kind: str = "any"

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if not bp:
            raise DomainError("schedule needs at least one breakpoint")
        if len(bp) != len(vals):
            raise DomainError(f"schedule has {len(bp)} breakpoints but {len(vals)} values")
        if any(not math.isfinite(x) for x in bp + vals):
            raise DomainError("schedule entries must be finite")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise DomainError("schedule breakpoints must be strictly increasing")
        # zero is kept as the degenerate deterministic limit
        if self.kind == "volatility" and any(v < 0 for v in vals):
            raise DomainError("volatility schedule values must be nonnegative")
        if self.kind == "correlation" and any(abs(v) > 1 for v in vals):
            raise DomainError("correlation schedule values must lie in [-1, 1]")
        if self.kind not in ("volatility", "correlation", "any"):
            raise DomainError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float, start: float = 0.0, kind: str = "any") -> "Schedule":
        return cls((start,), (value,), kind)

    @classmethod
    def from_mapping(cls, mapping: dict, kind: str = "any") -> "Schedule":
        items = sorted((float(k), float(v)) for k, v in mapping.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items), kind)

    def __call__(self, t: float) -> float:
        return eval_schedule(self, t)

    def on_grid(self, t: np.ndarray) -> np.ndarray:
        """Vectorized evaluation (same right-continuous convention)."""
        t = np.asarray(t, dtype=float)
        if t.size and t.min() < self.breakpoints[0]:
            raise DomainError(f"time {t.min()} precedes first breakpoint {self.breakpoints[0]}")
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.asarray(self.values)[idx]

    def frozen(self, t: float) -> "Schedule":
        """Constant schedule holding the value in force at ``t``."""
        return Schedule((self.breakpoints[0],), (self(t),), self.kind)


def eval_schedule(s: Schedule, t: float) -> float:
    """Value of ``s`` at time ``t`` (right-continuous at breakpoints)."""
    if not t >= s.breakpoints[0]:
        raise DomainError(f"time {t} precedes first breakpoint {s.breakpoints[0]}")
    k = int(np.searchsorted(s.breakpoints, t, side="right")) - 1
    return s.values[k]


def capital_reserves(a, l):
    """Assets minus liabilities (net worth)."""
    return a - l


def is_default(G, H, level: float):
    """Default test on log-assets / log-liabilities.

    For ``level == 0`` the test ``exp(G) - exp(H) < 0`` is evaluated as
    ``G < H``, which is the same condition without two exponentials.
    """
    if level == 0.0:
        return G < H
    return np.exp(G) - np.exp(H) < level


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the N-bank system.

    Drift rates ``mu_a``, ``mu_l`` only enter the uncoupled geometric
    Brownian motion variant; the cooperative model replaces them with the
    ideal-bank drift.

    ``failed_banks`` selects what happens to a bank after its default:
    ``"retain"`` keeps it evolving inside the cooperation sums (the sums run
    over all N banks and a default is only recorded), ``"remove"`` freezes
    it and drops it from the sums.
    """

    n_banks: int
    mu_a: float
    mu_l: float
    sigma_a: Schedule
    sigma_l: Schedule
    rho_a: Schedule
    rho_l: Schedule
    a0: float
    l0: float
    default_level: float = 0.0
    failed_banks: str = "retain"

    def __post_init__(self):
        if self.failed_banks not in FAILED_BANK_MODES:
            raise DomainError(f"failed_banks must be one of {FAILED_BANK_MODES}")
        if int(self.n_banks) != self.n_banks or self.n_banks <= 1:
            raise DomainError("n_banks must be an integer greater than 1")
        if not (self.a0 > 0 and self.l0 > 0):
            raise DomainError("initial assets and liabilities must be positive")
        if not self.a0 - self.l0 > 0:
            raise DomainError("banks must be solvent at the initial time (a0 > l0)")
        if not self.default_level >= 0:
            raise DomainError("default level must be nonnegative")
        if capital_reserves(self.a0, self.l0) <= self.default_level:
            raise DomainError("initial reserves must exceed the default level")
        for name, kind in (("sigma_a", "volatility"), ("sigma_l", "volatility"),
                           ("rho_a", "correlation"), ("rho_l", "correlation")):
            s = getattr(self, name)
            if not isinstance(s, Schedule):
                s = Schedule.constant(float(s), kind=kind)
                object.__setattr__(self, name, s)
            elif s.kind != kind:
                object.__setattr__(self, name, Schedule(s.breakpoints, s.values, kind))

    def frozen(self, t: float) -> "ModelParams":
        """Copy with every schedule held at its value in force at ``t``."""
        return ModelParams(self.n_banks, self.mu_a, self.mu_l,
                           self.sigma_a.frozen(t), self.sigma_l.frozen(t),
                           self.rho_a.frozen(t), self.rho_l.frozen(t),
                           self.a0, self.l0, self.default_level, self.failed_banks)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function through ``(knots[k], values[k])``."""

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = tuple(float(x) for x in self.knots)
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        if len(k) != len(v) or len(k) < 1:
            raise DomainError("knots and values must be nonempty and of equal length")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise DomainError("knots must be strictly increasing")

    @classmethod
    def constant(cls, value: float, t0: float, t1: float) -> "PiecewiseLinear":
        return cls((t0, t1), (value, value))

    @property
    def domain(self) -> tuple:
        return self.knots[0], self.knots[-1]

    def _segment(self, t: float) -> int:
        # right-hand segment at kinks; last segment at the right end
        n = len(self.knots)
        if n == 1:
            return 0
        k = int(np.searchsorted(self.knots, t, side="right")) - 1
        return min(max(k, 0), n - 2)

    def value(self, t: float) -> float:
        lo, hi = self.domain
        tol = 1e-12 * max(1.0, abs(hi))
        if not lo - tol <= t <= hi + tol:
            raise DomainError(f"t = {t} outside [{lo}, {hi}]")
        if len(self.knots) == 1:
            return self.values[0]
        k = self._segment(t)
        t0, t1 = self.knots[k], self.knots[k + 1]
        v0, v1 = self.values[k], self.values[k + 1]
        if t == t1:
            return v1
        return v0 + (v1 - v0) * ((t - t0) / (t1 - t0))

    def slope(self, t: float) -> float:
        if len(self.knots) == 1:
            return 0.0
        k = self._segment(t)
        return (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])


@dataclass(frozen=True)
class IdealBankPath:
    """Target assets ``phi`` and liabilities ``psi`` of the ideal bank.

    Both are positive and the ideal reserves ``phi - psi`` stay positive on
    the whole domain (checked at every knot, which suffices for
    piecewise-linear functions).
    """

    phi: PiecewiseLinear
    psi: PiecewiseLinear
    t_start: float = field(default=None)
    t_end: float = field(default=None)

    def __post_init__(self):
        lo = max(self.phi.knots[0], self.psi.knots[0])
        hi = min(self.phi.knots[-1], self.psi.knots[-1])
        t0 = lo if self.t_start is None else float(self.t_start)
        t1 = hi if self.t_end is None else float(self.t_end)
        if t0 < lo or t1 > hi or t1 < t0:
            raise DomainError(f"domain [{t0}, {t1}] not covered by the phi/psi knots")
        object.__setattr__(self, "t_start", t0)
        object.__setattr__(self, "t_end", t1)
        pts = sorted({t0, t1, *(k for k in self.phi.knots + self.psi.knots if t0 <= k <= t1)})
        for t in pts:
            p, q = self.phi.value(t), self.psi.value(t)
            if not p > 0:
                raise DomainError(f"ideal assets must stay positive (phi({t}) = {p})")
            if not q > 0:
                raise DomainError(f"ideal liabilities must stay positive (psi({t}) = {q})")
            if not p - q > 0:
                raise DomainError(f"ideal reserves must stay positive (xi({t}) = {p - q})")

    @classmethod
    def constant(cls, phi: float, psi: float, t0: float, t1: float) -> "IdealBankPath":
        return cls(PiecewiseLinear.constant(phi, t0, t1), PiecewiseLinear.constant(psi, t0, t1))

    @property
    def domain(self) -> tuple:
        return self.t_start, self.t_end

    def dlog_on_grid(self, t: np.ndarray) -> tuple:
        """Right-hand derivatives of ln phi and ln psi at each grid time."""
        da = np.array([self.phi.slope(x) / self.phi.value(x) for x in t])
        dl = np.array([self.psi.slope(x) / self.psi.value(x) for x in t])
        return da, dl


def eval_ideal(path: IdealBankPath, t: float) -> tuple:
    """Return ``(phi, psi, dlog_phi_dt, dlog_psi_dt)`` at ``t``.

    Derivatives are right-hand at kinks; at the right end of the domain the
    slope of the last segment is used.
    """
    t0, t1 = path.domain
    if not t0 <= t <= t1:
        raise DomainError(f"time {t} outside ideal-path domain [{t0}, {t1}]")
    p, q = path.phi.value(t), path.psi.value(t)
    return p, q, path.phi.slope(t) / p, path.psi.slope(t) / q
