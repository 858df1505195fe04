"""Linear-quadratic control of the pseudo mean bank.

The value function is the quadratic form ``V = a Z^2 + b S^2 + c Z S + d``
whose coefficients solve a final-value Riccati system on ``[0, T1]``::

    a' = a^2/l1 + c^2/(4 l2) - |ra rl| - l3 (1 - |ra|)
    b' = b^2/l2 + c^2/(4 l1) - |ra rl| - l4 (1 - |rl|)
    c' = a c/l1 + b c/l2 + 2 |ra rl|
    d' = -a sa^2 - b sl^2
    a(T1) = b(T1) = c(T1) = d(T1) = 0

The system is integrated with classical RK4 in reversed time
``tau = T1 - t``. Matching the optimal feedback against the pseudo mean-field
drifts gives the cooperation rates ``alpha, gamma, g, h``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RiccatiBlowupError
from .kernels import get_kernels

BLOWUP_BOUND = 1e6


@dataclass(frozen=True)
class ControlWeights:
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float

    def __post_init__(self):
        for k in ("lambda1", "lambda2", "lambda3", "lambda4"):
            v = getattr(self, k)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{k} must be positive, got {v}")

    @classmethod
    def uniform(cls, lam: float) -> "ControlWeights":
        return cls(lam, lam, lam, lam)


@dataclass(frozen=True)
class RiccatiSolution:
    """Value-function coefficients on the uniform grid ``grid`` over ``[0, T1]``."""

    grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    weights: ControlWeights
    rho_a: float
    rho_l: float
    sigma_a: float
    sigma_l: float
    elapsed: float = field(default=0.0, compare=False)

    @property
    def T1(self) -> float:
        return float(self.grid[-1])

    def coefficients(self, t: float) -> tuple:
        """Linearly interpolated ``(a, b, c, d)`` at ``t``."""
        if not self.grid[0] <= t <= self.grid[-1]:
            raise DomainError(f"time {t} outside [{self.grid[0]}, {self.grid[-1]}]")
        return tuple(float(np.interp(t, self.grid, v)) for v in (self.a, self.b, self.c, self.d))

    def residuals(self) -> np.ndarray:
        """Central-difference residuals of the four ODEs at interior grid points.

        Returns an array of shape (4, n_steps - 1).
        """
        w = self.weights
        ra, rl = abs(self.rho_a), abs(self.rho_l)
        rr = ra * rl
        h = np.diff(self.grid)
        dt = h[1:] + h[:-1]
        a, b, c = self.a[1:-1], self.b[1:-1], self.c[1:-1]
        fa = a * a / w.lambda1 + c * c / (4 * w.lambda2) - rr - w.lambda3 * (1 - ra)
        fb = b * b / w.lambda2 + c * c / (4 * w.lambda1) - rr - w.lambda4 * (1 - rl)
        fc = a * c / w.lambda1 + b * c / w.lambda2 + 2 * rr
        fd = -a * self.sigma_a ** 2 - b * self.sigma_l ** 2
        out = []
        for v, f in ((self.a, fa), (self.b, fb), (self.c, fc), (self.d, fd)):
            out.append((v[2:] - v[:-2]) / dt - f)
        return np.array(out)


@dataclass(frozen=True)
class CooperationRates:
    """Cooperation rates on an increasing time grid (linear interpolation).

    ``clamped_alpha`` / ``clamped_gamma`` mark grid points where the raw
    extracted rate was negative and has been set to zero.
    """

    grid: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    g: np.ndarray
    h: np.ndarray
    clamped_alpha: np.ndarray = None
    clamped_gamma: np.ndarray = None

    def __post_init__(self):
        n = len(self.grid)
        for k in ("alpha", "gamma", "g", "h"):
            v = np.asarray(getattr(self, k), dtype=float)
            if v.shape != (n,):
                raise DomainError(f"{k} must have one entry per grid point")
            object.__setattr__(self, k, v)
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if np.any(self.alpha < 0) or np.any(self.gamma < 0):
            raise DomainError("alpha and gamma must be nonnegative")
        for k in ("clamped_alpha", "clamped_gamma"):
            if getattr(self, k) is None:
                object.__setattr__(self, k, np.zeros(n, dtype=bool))

    @classmethod
    def constant(cls, alpha: float, gamma: float, t0: float, t1: float,
                 g: float = 0.0, h: float = 0.0) -> "CooperationRates":
        grid = np.array([t0, t1], dtype=float)
        one = np.ones(2)
        return cls(grid, alpha * one, gamma * one, g * one, h * one)

    @property
    def span(self) -> tuple:
        return float(self.grid[0]), float(self.grid[-1])

    def shifted(self, dt: float) -> "CooperationRates":
        return CooperationRates(self.grid + dt, self.alpha, self.gamma, self.g, self.h,
                                self.clamped_alpha, self.clamped_gamma)

    def on_grid(self, t) -> tuple:
        """Interpolated ``(alpha, gamma, g, h)`` arrays at the times ``t``."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.span
        tol = 1e-9 * max(1.0, abs(hi))
        if t.size and (t.min() < lo - tol or t.max() > hi + tol):
            raise DomainError(f"times [{t.min()}, {t.max()}] outside rate grid [{lo}, {hi}]")
        return tuple(np.interp(t, self.grid, v) for v in (self.alpha, self.gamma, self.g, self.h))

    def at(self, t: float) -> tuple:
        return tuple(float(v[0]) for v in self.on_grid(np.array([t])))

    def window_mean(self, which: str = "alpha", length: float | None = None) -> float:
        """Trapezoidal integral over the grid divided by ``length``.

        ``length`` defaults to the grid span. On a uniform grid a constant
        rate returns its value exactly.
        """
        v = getattr(self, which)
        span = self.grid[-1] - self.grid[0]
        length = span if length is None else length
        n = len(v) - 1
        if n == 0:
            return float(v[0])
        h = np.diff(self.grid)
        if np.allclose(h, h[0], rtol=1e-9, atol=0):
            integral_over_h = v[0] / 2 + v[1:-1].sum() + v[-1] / 2
            return float(integral_over_h / n * (span / length))
        return float(np.sum((v[1:] + v[:-1]) / 2 * h) / length)


def hamiltonian(p1: float, p2: float, w: ControlWeights) -> float:
    """Minimum over the controls of ``d1 p1 + l1 d1^2 + d2 p2 + l2 d2^2``."""
    return -p1 * p1 / (4 * w.lambda1) - p2 * p2 / (4 * w.lambda2)


def _check_rho(rho_a: float, rho_l: float):
    for name, r in (("rho_a", rho_a), ("rho_l", rho_l)):
        if not abs(r) < 1:
            raise DomainError(f"|{name}| must be < 1 for the control problem, got {r}")


def solve_riccati(w: ControlWeights, rho_a: float, rho_l: float, sigma_a: float,
                  sigma_l: float, T1: float = 1.0, n_steps: int = 10_000, *,
                  bound: float = BLOWUP_BOUND, backend: str | None = None) -> RiccatiSolution:
    """Integrate the Riccati system backward from ``t = T1`` to ``t = 0``.

    Raises
    ------
    DomainError
        If ``|rho| >= 1``, ``T1 <= 0`` or ``n_steps < 100``.
    RiccatiBlowupError
        If a coefficient leaves ``[-bound, bound]`` or turns non-finite
        before ``t = 0``.
    """
    _check_rho(rho_a, rho_l)
    if not T1 > 0:
        raise DomainError("T1 must be positive")
    if int(n_steps) != n_steps or n_steps < 100:
        raise DomainError("n_steps must be an integer >= 100")
    k = get_kernels(backend)
    start = time.perf_counter()
    a, b, c, d, done = k.rk4_riccati(
        float(w.lambda1), float(w.lambda2), float(w.lambda3), float(w.lambda4),
        float(abs(rho_a)), float(abs(rho_l)), float(sigma_a) ** 2, float(sigma_l) ** 2,
        float(T1), int(n_steps), float(bound))
    if done < n_steps:
        t_fail = T1 - done * (T1 / n_steps)
        raise RiccatiBlowupError(
            f"Riccati system has no global solution on [0, {T1}]: "
            f"coefficients exceed {bound:g} near t = {t_fail:.6g}")
    grid = np.linspace(0.0, T1, int(n_steps) + 1)
    return RiccatiSolution(grid, a[::-1].copy(), b[::-1].copy(), c[::-1].copy(), d[::-1].copy(),
                           w, float(rho_a), float(rho_l), float(sigma_a), float(sigma_l),
                           time.perf_counter() - start)


def feedback_coefficients(sol: RiccatiSolution, t: float) -> tuple:
    """Linear feedback matrix ``[[kzz, kzs], [ksz, kss]]`` with ``beta = K @ (Z, S)``."""
    a, b, c, _ = sol.coefficients(t)
    w = sol.weights
    return ((-a / w.lambda1, -c / (2 * w.lambda1)),
            (-c / (2 * w.lambda2), -b / w.lambda2))


def optimal_feedback(sol: RiccatiSolution, w: ControlWeights, t: float, Z: float, S: float) -> tuple:
    """Optimal controls ``(beta1, beta2)`` at state ``(Z, S)`` and time ``t``."""
    a, b, c, _ = sol.coefficients(t)
    beta1 = -(2 * a * Z + c * S) / (2 * w.lambda1)
    beta2 = -(2 * b * S + c * Z) / (2 * w.lambda2)
    return beta1, beta2


def rates_from_riccati(sol: RiccatiSolution, w: ControlWeights, rho_a: float,
                       rho_l: float) -> CooperationRates:
    """Extract ``alpha, gamma, g, h`` by matching feedback and drift coefficients.

    Negative ``alpha`` / ``gamma`` are clamped to zero pointwise. ``g`` and
    ``h`` are left as extracted (they carry the sign of ``c``).
    """
    _check_rho(rho_a, rho_l)
    ra, rl = abs(rho_a), abs(rho_l)
    alpha = sol.a / (w.lambda1 * (1 - ra))
    gamma = sol.b / (w.lambda2 * (1 - rl))
    g = sol.c / (2 * w.lambda1 * ra) if ra > 0 else np.zeros_like(sol.c)
    h = sol.c / (2 * w.lambda2 * rl) if rl > 0 else np.zeros_like(sol.c)
    ca, cg = alpha < 0, gamma < 0
    return CooperationRates(sol.grid.copy(), np.where(ca, 0.0, alpha), np.where(cg, 0.0, gamma),
                            g, h, ca, cg)
