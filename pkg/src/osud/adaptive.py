"""Adaptive quantile-density policy.

At step ``i`` the policy samples a quantile from a density proportional to
``(1 - p q)^{n-2}`` on ``[eps_{i-1}, eps_i]`` and accepts iff the drawn value
lies in that top mass. The breakpoints and the guarantee ``theta_n`` are
fixed by two normalization conditions: the first density integrates to one,
and each later density integrates to the previous one discounted by
``1 - p q``.

Working in ``H = (1 - p eps)^{n-1}`` the conditions become

    H_1 = 1 - 1 / (n theta),
    H_{i+1} = H_i - ((n - 1) / n) (w_{i-1}^n - w_i^n),   w = 1 - p eps,

and ``theta_n`` is the unique value for which the recursion lands exactly on
``eps_n = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import clairvoyant
from .dist import Instance
from .errors import DomainError, InvalidScheduleError, NumericalError
from .mc import Policy


@dataclass(frozen=True, eq=False)
class AdaptiveSchedule:
    """Solved breakpoints and guarantee parameter.

    Attributes
    ----------
    n, p, zeta : parameters the schedule was solved for.
    theta_n : float
    breakpoints : ndarray
        ``eps_0 = 0 < eps_1 < ... < eps_n = 1``.
    end_gap : float
        Mass defect ``theta n |H_n - (1 - p)^{n-1}|`` left by the recursion
        before the last breakpoint is pinned to 1. For large ``n`` the
        breakpoint itself is ill-conditioned (``H_n`` underflows relative to
        rounding), so the defect is measured in mass.
    log_w : ndarray
        ``log(1 - p eps_i)`` for ``i = 0..n``, kept for accurate sampling.
    """

    n: int
    p: float
    zeta: float
    theta_n: float
    breakpoints: np.ndarray
    log_w: np.ndarray = field(repr=False)
    end_gap: float = 0.0

    @property
    def normalizers(self) -> np.ndarray:
        """``int beta_i`` over ``[eps_{i-1}, eps_i]`` for ``i = 1..n``.

        ``theta n ((1-p eps_{i-1})^{n-1} - (1-p eps_i)^{n-1})``.
        """
        if self.n == 1:
            return np.array([1.0])
        lw = self.log_w
        m = self.n - 1
        return self.theta_n * self.n * (np.exp(m * lw[:-1]) - np.exp(m * lw[1:]))

    @property
    def discounted_normalizers(self) -> np.ndarray:
        """``int beta_i (1 - p q) dq`` for ``i = 1..n``."""
        if self.n == 1:
            return np.array([1.0 - self.p / 2.0])
        lw = self.log_w
        n = self.n
        return self.theta_n * (n - 1) * (np.exp(n * lw[:-1]) - np.exp(n * lw[1:]))

    def residuals(self) -> dict:
        """Normalization residuals; all should vanish."""
        a = self.normalizers
        b = self.discounted_normalizers
        return {
            "first": abs(a[0] - 1.0),
            "chain": float(np.max(np.abs(a[1:] - b[:-1]))) if self.n > 1 else 0.0,
            "end": self.end_gap,
        }

    def recursion_residual(self) -> float:
        """Largest defect of the cumulative recursion on ``g(q) = (1 - p q)^{n-1}``.

        Summing the chain conditions from the first step gives
        ``g(e_i) - g(e_{i-1}) = -1/(n theta) - p (e_{i-1} g(e_{i-1}) - int_0^{e_{i-1}} g)``.
        """
        if self.n == 1:
            return 0.0
        e = self.breakpoints
        p, n = self.p, self.n
        g = np.exp((n - 1) * self.log_w)
        big_g = -np.expm1(n * self.log_w) / (n * p)
        lhs = g[1:] - g[:-1]
        rhs = -1.0 / (n * self.theta_n) - p * (e[:-1] * g[:-1] - big_g[:-1])
        return float(np.max(np.abs(lhs - rhs)))

    def sample_quantile(self, i: int, rng: np.random.Generator, size=None):
        """Quantile for step ``i`` (1-based), by inverting the ``H`` profile."""
        if not 1 <= i <= self.n:
            raise DomainError(f"step {i} outside 1..{self.n}")
        if self.n == 1:
            return np.ones(size) if size is not None else 1.0
        m = self.n - 1
        h0 = math.exp(m * self.log_w[i - 1])
        h1 = math.exp(m * self.log_w[i])
        u = rng.random(size)
        h = h0 - u * (h0 - h1)
        q = -np.expm1(np.log(np.maximum(h, 1e-300)) / m) / self.p
        return np.clip(q, self.breakpoints[i - 1], self.breakpoints[i])

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "zeta": self.zeta, "theta_n": self.theta_n,
                "breakpoints": self.breakpoints.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "AdaptiveSchedule":
        e = np.asarray(data["breakpoints"], dtype=float)
        n, p = int(data["n"]), float(data["p"])
        if e.size != n + 1 or e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise InvalidScheduleError("breakpoints must increase from 0 over n + 1 entries")
        return cls(n, p, float(data.get("zeta", 0.0)), float(data["theta_n"]), e, np.log1p(-p * e))


def _run(theta: float, n: int, p: float):
    """Run the recursion; returns ``(status, log_w)``.

    ``status`` is -1 when the breakpoints pass 1 before step ``n`` (theta too
    small), +1 when they stay below 1 after step ``n`` (theta too large).
    """
    m = n - 1
    h_end_log = m * math.log1p(-p)
    h1 = 1.0 - 1.0 / (n * theta)
    if h1 <= 0 or math.log(h1) <= h_end_log:
        return -1, None
    lw = [0.0, math.log(h1) / m]
    for _ in range(1, n):
        a, b = lw[-2], lw[-1]
        h = math.exp(m * b) - m / n * (math.exp(n * a) - math.exp(n * b))
        if h <= 0 or math.log(h) <= h_end_log:
            if len(lw) == n + 1:
                break
            return -1, None
        lw.append(math.log(h) / m)
    # lw holds log w_0..log w_n; the end condition is w_n = 1 - p
    return (1 if lw[-1] > math.log1p(-p) else -1), lw


def _bisect_theta(n, p, lo, hi):
    while _run(hi, n, p)[0] < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("no upper bracket for theta")
    if _run(lo, n, p)[0] > 0:
        raise NumericalError("lower bracket for theta is not below the root")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _run(mid, n, p)[0] < 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def solve_schedule(n: int, p: float, zeta: float = 0.0, *, bracket=(1e-3, 10.0)) -> AdaptiveSchedule:
    """Solve for ``theta_n`` and the breakpoints.

    Every breakpoint decreases in ``theta``, so bisection on whether the
    recursion overshoots ``eps = 1`` before step ``n`` converges to the unique
    root. The upper end of ``bracket`` is doubled until it lies above the
    root. ``zeta`` does not enter the recursion.
    """
    if n < 1 or not 0 < p < 1:
        raise DomainError("need n >= 1 and p in (0, 1)")
    if n == 1:
        return AdaptiveSchedule(1, p, zeta, 1.0, np.array([0.0, 1.0]), np.array([0.0, math.log1p(-p)]))
    lo, hi = _bisect_theta(n, p, *bracket)
    status, lw = _run(hi, n, p)
    if lw is None:
        raise NumericalError("recursion failed at the bracket end")
    lw = np.array(lw)
    eps = -np.expm1(lw) / p
    eps[0] = 0.0
    m = n - 1
    end_gap = hi * n * abs(math.exp(m * lw[-1]) - math.exp(m * math.log1p(-p)))
    # the root sits between floating-point neighbours; pin the last breakpoint
    eps[-1] = 1.0
    lw[-1] = math.log1p(-p)
    if np.any(np.diff(eps) <= 0):
        raise NumericalError("breakpoints are not strictly increasing")
    return AdaptiveSchedule(n, p, zeta, hi, eps, lw, float(end_gap))


def guarantee(n: int, p: float, schedule: AdaptiveSchedule | None = None) -> float:
    """``theta_n (1 - (1-p)^{n-1} p n / (1 - (1-p)^n))``."""
    if n < 1:
        raise DomainError("n must be positive")
    if n == 1:
        return 1.0
    s = solve_schedule(n, p) if schedule is None else schedule
    tail = (1.0 - p) ** (n - 1) * p * n / -math.expm1(n * math.log1p(-p))
    return s.theta_n * (1.0 - tail)


def alg_value(inst: Instance, s: AdaptiveSchedule) -> float:
    """``theta_n (v(OPT) - n (1 - (1 - zeta) p)(1 - p)^{n-1} E[X])``."""
    if s.n != inst.n or s.p != inst.p:
        raise InvalidScheduleError("schedule was solved for a different (n, p)")
    if inst.n == 1:
        return (1.0 - inst.p + inst.p * inst.zeta) * inst.dist.mean()
    opt = clairvoyant.opt_value(inst, check=False).value
    g1 = inst.n * inst.recovery_factor * (1.0 - inst.p) ** (inst.n - 1)
    return s.theta_n * (opt - g1 * inst.dist.mean())


class AdaptivePolicy(Policy):
    """Sample the step quantile from the schedule; accept iff the value is in it."""

    def __init__(self, schedule: AdaptiveSchedule):
        self.schedule = schedule

    def decide(self, step, values, quantiles, episodes, rng):
        q = self.schedule.sample_quantile(step + 1, rng, quantiles.shape[0])
        return quantiles <= q
