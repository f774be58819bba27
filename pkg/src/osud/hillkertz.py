"""The Hill-Kertz constant, its ODE curve and the max-variant root lambda(p).

``theta*`` is ``1 / beta`` where ``beta`` solves

    int_0^1 dy / (y - y ln y + beta - 1) = 1,

and the curve ``y`` solves ``y' = y (ln y - 1) - (beta - 1)`` with
``y(0) = 1``. At ``theta*`` the curve reaches zero exactly at ``t = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect, brentq

from ._quad import gauss_legendre, simpson
from .errors import DomainError

ZERO_EVENT = 1e-10


def _integrand(y, beta):
    y = np.asarray(y, dtype=float)
    ylny = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
    return 1.0 / (y - ylny + beta - 1.0)


def hk_integral(beta: float, method: str = "simpson") -> float:
    """``int_0^1 dy / (y - y ln y + beta - 1)`` for ``beta > 1``.

    ``method="simpson"`` uses adaptive Simpson in ``y``.
    ``method="gauss"`` uses composite Gauss-Legendre after ``y = s**4``,
    which smooths the ``y ln y`` term at the origin.
    """
    if not beta > 1.0:
        raise DomainError("beta must exceed 1")
    if method == "simpson":
        return simpson(lambda y: _integrand(y, beta), 0.0, 1.0, rtol=1e-14, atol=1e-16)[0]
    if method == "gauss":
        return gauss_legendre(lambda s: 4.0 * s ** 3 * _integrand(s ** 4, beta), 0.0, 1.0,
                              order=40, panels=64)
    raise ValueError(f"unknown method {method!r}")


def theta_residual(theta: float, method: str = "simpson") -> float:
    """Residual of the defining integral equation at ``theta``."""
    return hk_integral(1.0 / theta, method) - 1.0


@lru_cache(maxsize=8)
def _theta_star(tol: float, method: str) -> float:
    # the integral decreases in beta; it is above 1 near beta = 1
    beta = bisect(lambda b: hk_integral(b, method) - 1.0, 1.05, 3.0, xtol=tol * 1e-2, rtol=1e-15,
                  maxiter=200)
    return 1.0 / beta


def theta_star(tol: float = 1e-12, method: str = "simpson") -> float:
    """Hill-Kertz constant ``theta* ~ 0.7454``.

    Parameters
    ----------
    tol : float
        Bisection tolerance on ``beta``; at least ``1e-12``.
    method : {"simpson", "gauss"}
        Quadrature rule for the integral equation.
    """
    if tol < 1e-12:
        raise DomainError("tol must be at least 1e-12")
    return _theta_star(float(tol), method)


def phi(y, beta):
    """Right-hand side ``y (ln y - 1) - (beta - 1)``; accepts arrays."""
    y = np.asarray(y, dtype=float)
    safe = np.maximum(y, 1e-300)
    return np.where(y > 0, safe * (np.log(safe) - 1.0), 0.0) - (beta - 1.0)


@dataclass(frozen=True, eq=False)
class OdeSolution:
    """Tabulated solution of the Hill-Kertz ODE.

    Attributes
    ----------
    theta : float
        Parameter the ODE was solved under (``beta = 1 / theta``).
    grid : ndarray
        Increasing ``t`` values from 0 to ``t_end``, dense near the end.
    y_values : ndarray
        ``y`` on the grid.
    t_end : float
        Where integration stopped: 1, or the time ``y`` fell to ``1e-10``.
    hit_zero : bool
        Whether ``y`` reached ``1e-10`` before ``t = 1``.
    """

    theta: float
    grid: np.ndarray
    y_values: np.ndarray
    t_end: float
    hit_zero: bool
    _dense: object = field(repr=False)

    @property
    def beta(self) -> float:
        return 1.0 / self.theta

    @property
    def dy_values(self) -> np.ndarray:
        return phi(self.y_values, self.beta)

    def y(self, t):
        """Dense-output ``y(t)`` for ``t`` in ``[0, t_end]``."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.t_end):
            raise DomainError(f"t must lie in [0, {self.t_end}]")
        out = np.asarray(self._dense(arr.ravel()), dtype=float).reshape(-1)
        out = np.clip(out, 0.0, 1.0).reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def dy(self, t):
        """``y'(t)`` through the ODE right-hand side."""
        out = phi(self.y(t), self.beta)
        return float(out) if np.ndim(out) == 0 else out

    def d2y(self, t):
        """``y''(t) = y'(t) ln y(t)``."""
        yy = np.asarray(self.y(t), dtype=float)
        out = phi(yy, self.beta) * np.log(yy)
        return float(out) if out.ndim == 0 else out

    def y_inverse(self, v):
        """Return ``t`` with ``y(t) = v``; ``v`` must lie in the tabulated range."""
        arr = np.asarray(v, dtype=float)
        ymin = float(self.y_values[-1])
        if np.any(arr > 1.0) or np.any(arr < ymin):
            raise DomainError(f"v must lie in [{ymin:.3e}, 1]")
        flat = arr.ravel()
        # bracket on the decreasing table, then Newton clipped to the bracket
        k = np.searchsorted(-self.y_values, -flat, side="left")
        k = np.clip(k, 1, self.grid.size - 1)
        lo, hi = self.grid[k - 1], self.grid[k]
        y_lo, y_hi = self.y_values[k - 1], self.y_values[k]
        frac = np.where(y_lo > y_hi, (y_lo - flat) / np.where(y_lo > y_hi, y_lo - y_hi, 1.0), 0.0)
        t = lo + frac * (hi - lo)
        for _ in range(8):
            yt = np.asarray(self._dense(t), dtype=float).reshape(-1)
            step = (yt - flat) / phi(yt, self.beta)
            t = np.clip(t - step, lo, hi)
            if np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, t)):
                break
        t[flat == 1.0] = 0.0
        return float(t[0]) if arr.ndim == 0 else t.reshape(arr.shape)

    def to_csv(self, path) -> None:
        """Write ``t, y, dy`` rows with a header."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y", "dy"])
            for t, yv, dv in zip(self.grid, self.y_values, self.dy_values):
                w.writerow([f"{t:.12g}", f"{yv:.12g}", f"{dv:.12g}"])


def solve_y(theta: float | None = None, grid_size: int = 16384) -> OdeSolution:
    """Integrate the Hill-Kertz ODE from ``y(0) = 1``.

    Integration stops at ``t = 1`` or when ``y`` falls to ``1e-10``. For
    ``theta`` off the constant the curve either hits zero early or ends
    bounded away from zero; both are reported through ``hit_zero`` and
    ``y_values[-1]``.
    """
    if theta is None:
        theta = theta_star()
    if not 0.5 < theta < 1.0:
        raise DomainError("theta must lie in (0.5, 1)")
    beta = 1.0 / theta

    def rhs(t, s):
        y = s[0]
        return [y * (math.log(max(y, 1e-300)) - 1.0) - (beta - 1.0)]

    def hit(t, s):
        return s[0] - ZERO_EVENT

    hit.terminal = True
    hit.direction = -1
    res = solve_ivp(rhs, (0.0, 1.0), [1.0], method="DOP853", rtol=1e-13, atol=1e-15,
                    events=hit, dense_output=True)
    if res.status < 0:
        from .errors import NumericalError
        raise NumericalError(f"ODE integration failed: {res.message}")
    hit_zero = res.status == 1
    t_end = float(res.t[-1])
    k = np.arange(grid_size)
    grid = t_end * np.sin(0.5 * np.pi * k / (grid_size - 1))
    grid[-1] = t_end
    dense = res.sol

    def ev(t):
        return dense(t)[0]

    yv = np.clip(ev(grid), 0.0, 1.0)
    yv[0] = 1.0
    return OdeSolution(float(theta), grid, yv, t_end, bool(hit_zero), ev)


@lru_cache(maxsize=1)
def default_solution() -> OdeSolution:
    """Cached solution at ``theta*``."""
    return solve_y(theta_star())


def _lambda_gap(lam, p):
    return -math.expm1(-p * lam) / (p * lam) + math.expm1(-lam)


def lambda_p(p: float) -> float:
    """Unique positive root of ``1 - e^{-p lam} = p lam (1 - e^{-lam})``."""
    if not 0.0 < p <= 1.0:
        raise DomainError("p must lie in (0, 1]")
    if p == 1.0:
        return 1.0
    hi = 2.0 / p + 10.0
    return brentq(_lambda_gap, 1e-9, hi, args=(p,), xtol=1e-15, rtol=1e-15, maxiter=500)


def lambda_residual(p: float, lam: float | None = None) -> float:
    """``(1 - e^{-p lam}) - p lam (1 - e^{-lam})``."""
    lam = lambda_p(p) if lam is None else lam
    return -math.expm1(-p * lam) + p * lam * math.expm1(-lam)


def max_variant_ratio(p: float) -> float:
    """Asymptotic fixed-quantile ratio ``1 - e^{-lambda(p)}`` for the max objective."""
    return -math.expm1(-lambda_p(p))
