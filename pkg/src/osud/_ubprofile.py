"""Tabulated integrals behind the worst-case instance for adaptive policies.

With ``phi`` the Hill-Kertz right-hand side and ``r = -ln z`` define

    G(r) = int_{y_eps}^{e^{-r}} dz / phi(z)^2,
    J(r) = int_{y_eps}^{e^{-r}} (-ln z) dz / phi(z)^2,
    K(r) = int_0^r G = r G(r) + J(0) - J(r),

where ``y_eps = y(1 - eps)``. Substituting ``z = y(s)`` shows
``G(-ln y(t)) = int_t^{1-eps} -1/y'(s) ds``, so the continuous part of the
instance is ``(p / c) G(p n u)``. All three are stored on a uniform
``r``-grid with cubic Hermite interpolation using the exact derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInstanceError
from .hillkertz import OdeSolution, phi

R_CAP = 60.0


def _g1(r, beta):
    z = np.exp(-r)
    return z / phi(z, beta) ** 2


@dataclass(frozen=True, eq=False)
class UpperBoundProfile:
    theta: float
    eps: float
    p: float
    n: int
    y_eps: float
    r_max: float
    h: float
    G: np.ndarray
    dG: np.ndarray
    J: np.ndarray
    dJ: np.ndarray

    @classmethod
    def build(cls, y: OdeSolution, eps: float, p: float, n: int, *, cells: int = 8192,
              check_floor: bool = True) -> "UpperBoundProfile":
        if not 0 <= eps < 1 or not 0 < p < 1:
            raise InvalidInstanceError("need eps in [0, 1) and p in (0, 1)")
        beta = y.beta
        if eps > 0:
            y_eps = float(y.y(1.0 - eps))
            if y_eps <= 0:
                raise InvalidInstanceError("y(1 - eps) is not positive")
            r_max = -math.log(y_eps)
            floor = math.ceil(r_max / p)
            if check_floor and n < floor:
                raise InvalidInstanceError(f"n={n} is below the floor {floor} for eps={eps}, p={p}")
        else:
            y_eps = 0.0
            r_max = R_CAP
        r_max = min(r_max, R_CAP)
        h = r_max / cells
        x, w = np.polynomial.legendre.leggauss(10)
        edges = np.linspace(0.0, r_max, cells + 1)
        nodes = edges[:-1, None] + 0.5 * h * (x[None, :] + 1.0)
        f1 = _g1(nodes, beta)
        c1 = 0.5 * h * np.sum(w * f1, axis=1)
        c2 = 0.5 * h * np.sum(w * f1 * nodes, axis=1)
        # tail integrals from each grid point up to r_max
        G = np.concatenate([np.cumsum(c1[::-1])[::-1], [0.0]])
        J = np.concatenate([np.cumsum(c2[::-1])[::-1], [0.0]])
        g1 = _g1(edges, beta)
        return cls(y.theta, eps, p, int(n), y_eps, r_max, h, G, -g1, J, -g1 * edges)

    # cubic Hermite evaluation on the uniform grid
    def _eval(self, val, der, r):
        r = np.asarray(r, dtype=float)
        inside = r < self.r_max
        rc = np.clip(r, 0.0, self.r_max)
        k = np.minimum((rc / self.h).astype(np.int64), val.size - 2)
        s = rc / self.h - k
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        out = h00 * val[k] + h10 * self.h * der[k] + h01 * val[k + 1] + h11 * self.h * der[k + 1]
        return np.where(inside, out, 0.0)

    def G_of_r(self, r):
        return self._eval(self.G, self.dG, r)

    def J_of_r(self, r):
        return self._eval(self.J, self.dJ, r)

    def dG_of_r(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r_max, -_g1(r, 1.0 / self.theta), 0.0)

    def K_of_r(self, r):
        r = np.asarray(r, dtype=float)
        return r * self.G_of_r(r) + self.J[0] - self.J_of_r(r)

    def G_scalar(self, r: float) -> float:
        return float(self.G_of_r(np.array([r]))[0])

    def K_scalar(self, r: float) -> float:
        return float(self.K_of_r(np.array([r]))[0])
