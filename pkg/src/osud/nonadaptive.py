"""Single fixed-quantile threshold policies.

The policy accepts every value in the top ``q`` mass of ``F``. With
``A_n(q, p) = (1 - p)(1 - (1 - q p)^n) / p`` its value is

    (A_n(q, p) + zeta (1 - (1 - q p)^n)) * PE(q) / q,

where ``PE(q) = int_0^q Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from . import clairvoyant
from .dist import Instance, hard_instance_dist
from .errors import DomainError, InvalidInstanceError


def optimal_quantile(n: int, p: float) -> float:
    """``min(1, 1 / (p n))``."""
    if n < 1 or not 0 < p < 1:
        raise DomainError("need n >= 1 and p in (0, 1)")
    return min(1.0, 1.0 / (p * n))


def _hit_prob(q, p, n):
    """``1 - (1 - q p)^n`` without cancellation."""
    return -np.expm1(n * np.log1p(-q * p))


def a_n(q, p, n):
    """Expected number of retained acceptances ``E[min(Bin(n, q), D - 1)]``."""
    return (1.0 - p) * _hit_prob(q, p, n) / p


def alg_value(inst: Instance, q: float) -> float:
    """Closed-form value of the fixed-quantile policy at ``q``."""
    if not 0 < q <= 1:
        raise DomainError("q must lie in (0, 1]")
    n, p, z = inst.n, inst.p, inst.zeta
    hit = float(_hit_prob(q, p, n))
    return ((1.0 - p) * hit / p + z * hit) * inst.dist.partial_expectation(q) / q


def eta_bound(n: int, p: float, q: float) -> float:
    """Distribution-free lower bound on the ratio of the ``q`` policy."""
    if not 0 < q <= 1:
        raise DomainError("q must lie in (0, 1]")
    hit = float(_hit_prob(q, p, n))
    return hit / p * min(p / float(_hit_prob(1.0, p, n)), 1.0 / (q * n))


def eta_at_optimum(n: int, p: float) -> float:
    return eta_bound(n, p, optimal_quantile(n, p))


def rare_disruption_bound(alpha: float) -> float:
    """``(1 - e^{-alpha}) / alpha``: accept-all with ``p = alpha / n`` as ``n`` grows."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    return -math.expm1(-alpha) / alpha


@dataclass(frozen=True)
class NonAdaptiveReport:
    q: float
    alg_value: float
    opt_value: float
    ratio: float
    eta_bound: float


def report(inst: Instance, q: float | None = None) -> NonAdaptiveReport:
    """Value, benchmark, ratio and guarantee at ``q`` (default: the optimal quantile)."""
    q = optimal_quantile(inst.n, inst.p) if q is None else q
    alg = alg_value(inst, q)
    opt = clairvoyant.opt_value(inst, check=False).value
    return NonAdaptiveReport(q, alg, opt, alg / opt, eta_bound(inst.n, inst.p, q))


# -- the tight instance ------------------------------------------------------


def _crit_base(x):
    """``e^{-x}(1 + x) - 1``, accurate for small ``x``."""
    if x < 0.1:
        s, term = 0.0, 1.0
        for m in range(1, 30):
            term *= -x / m
            s += (1 - m) * term
        return s
    return math.exp(-x) * (1.0 + x) - 1.0


def critical_gap(lam: float, a1: float, a2: float, p: float) -> float:
    """``(e^{-lam p}(a1 + a1 p lam + a2 p lam^2) - a1)``."""
    x = lam * p
    return a1 * _crit_base(x) + a2 * p * lam * lam * math.exp(-x)


def critical_lambda(a1: float, a2: float, p: float, beta: float) -> float | None:
    """Positive root of the critical-point equation, or ``None`` if none is bracketed.

    A sign change is located with 64 log-spaced probes on
    ``[1e-9, max(beta, 4/p)]`` and refined to ``1e-12``.
    """
    if a1 <= 0:
        return None
    probes = np.geomspace(1e-9, max(beta, 4.0 / p), 64)
    vals = [critical_gap(x, a1, a2, p) for x in probes]
    for k in range(63):
        if vals[k] == 0.0:
            return float(probes[k])
        if vals[k] * vals[k + 1] < 0:
            return brentq(critical_gap, probes[k], probes[k + 1], args=(a1, a2, p), xtol=1e-12,
                          rtol=1e-15)
    return None


class HardInstanceResult(NamedTuple):
    alg_value: float
    opt_value: float
    ratio: float


def hard_instance_opt(a1: float, a2: float, beta: float, p: float, tol: float = 1e-12) -> float:
    """Large-``n`` benchmark ``a1 (1-p) + a2 sum_j P[Pois(beta) >= j] (1-p)^j``.

    The series stops at ``C2 = ceil(log_{1-p}(tol p / 2))``.
    """
    c2 = math.ceil(math.log(tol * p / 2.0) / math.log1p(-p))
    j = np.arange(1, c2 + 1)
    tail = stats.poisson.sf(j - 1, beta)
    return a1 * (1.0 - p) + a2 * float(np.sum(tail * (1.0 - p) ** j))


def hard_instance_alg(a1: float, a2: float, beta: float, p: float) -> tuple[float, float | None]:
    """Large-``n`` best fixed-quantile value and the interior critical point.

    Candidates: the spike alone, the whole ``a2`` block, and the interior
    critical point when it lies below ``beta``.
    """
    cands = [(1.0 - p) * a1]
    bp = beta * p
    cands.append((1.0 - p) * -math.expm1(-bp) * (a1 + a2 * beta) / bp)
    lam = critical_lambda(a1, a2, p, beta)
    if lam is not None and lam <= beta:
        x = lam * p
        cands.append((1.0 - p) * -math.expm1(-x) * (a1 + a2 * lam) / x)
    return max(cands), lam


def hard_instance_report(a1: float, a2: float, beta: float, p: float, n: int) -> HardInstanceResult:
    """Best fixed-quantile ratio on the tight instance in the large-``n`` regime.

    ``n`` only enters through the requirement ``beta <= n``.
    """
    if beta > n:
        raise InvalidInstanceError("beta must not exceed n")
    if a1 < 0 or a2 < 0 or a1 + a2 == 0:
        raise InvalidInstanceError("need a1, a2 >= 0, not both zero")
    alg, _ = hard_instance_alg(a1, a2, beta, p)
    opt = hard_instance_opt(a1, a2, beta, p)
    return HardInstanceResult(alg, opt, alg / opt)


def hard_instance_exact(a1: float, a2: float, beta: float, p: float, n: int, *,
                        spike_width: float | None = None, grid: int = 4000) -> HardInstanceResult:
    """Finite-``n`` cross-check on the explicit atom distribution.

    The supremum over ``q`` is taken on a grid of ``lam = q n`` values that
    includes every piece boundary, followed by a bounded refinement.
    """
    from scipy.optimize import minimize_scalar

    dist = hard_instance_dist(a1, a2, beta, n, spike_width)
    inst = Instance(n, dist, p)
    opt = clairvoyant.opt_value(inst, check=False).value
    edges = [hi for _, hi in dist.bounds]
    qs = np.unique(np.concatenate([np.geomspace(edges[0], 1.0, grid), edges]))
    vals = np.array([alg_value(inst, q) for q in qs])
    k = int(np.argmax(vals))
    best = float(vals[k])
    lo, hi = qs[max(k - 1, 0)], qs[min(k + 1, qs.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda q: -alg_value(inst, q), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return HardInstanceResult(best, opt, best / opt)


def lemma_mono_ratio(v, n: int, p: float) -> np.ndarray:
    """``v / (sum_{i=2}^n p (1-p)^{i-1} sum_{j<i} P[Bin(n,v) >= j] + (1-p)^n n v)``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    j = np.arange(1, n + 1)
    sf = stats.binom.sf(j[None, :] - 1, n, v[:, None])
    cums = np.cumsum(sf, axis=1)
    i = np.arange(2, n + 1)
    w = p * (1.0 - p) ** (i - 1)
    denom = (cums[:, : n - 1] @ w if n > 1 else 0.0) + (1.0 - p) ** n * n * v
    return v / denom
