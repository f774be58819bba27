"""Max-value objective: payoff is the largest value kept before disruption.

A fixed quantile ``q`` accepts ``Bin(n, q)`` values. If ``l`` of them are
retained before the process stops, the payoff is the maximum of ``l``
conditional draws, with mean

    mu_l = int_0^q Q(w) l (q - w)^{l-1} / q^l dw.

Collecting the stopping probabilities gives ``v = sum_l c_l mu_l``. The
same value has the single-integral form ``int_0^q W'(v) Q(v) dv`` with

    W(v) = (1-p) v / (p q + (1-p) v) * (1 - (1 - q p - (1-p) v)^n),  v < q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .clairvoyant import binom_pmf
from .dist import Instance
from .errors import DomainError, InvalidInstanceError
from .hillkertz import lambda_p


def opt_value_max(inst: Instance, include_disrupting: bool = False) -> float:
    """``(1 - p) E[max]``, or ``E[max]`` when the disrupting value counts."""
    n = inst.n
    val, _ = inst.dist.expect(lambda u: n * (1.0 - u) ** (n - 1), 0.0, 1.0,
                              primitive=lambda u: -(1.0 - u) ** n)
    return val if include_disrupting else (1.0 - inst.p) * val


def _mu_weights(n: int, p: float, q: float, include_disrupting: bool) -> np.ndarray:
    """``c_l`` for ``l = 1..L``; later terms are below rounding."""
    L = n
    if p > 0:
        L = min(n, max(1, math.ceil(math.log(1e-18) / math.log1p(-p))))
    l = np.arange(1, L + 1)
    pmf = binom_pmf(l, n, q)
    if include_disrupting:
        return p * (1.0 - p) ** (l - 1) * stats.binom.sf(l - 1, n, q) + (1.0 - p) ** l * pmf
    return p * (1.0 - p) ** l * stats.binom.sf(l, n, q) + (1.0 - p) ** l * pmf


def mu_l(inst: Instance, q: float, l: int) -> float:
    """Mean of the maximum of ``l`` draws conditioned on the top ``q`` mass."""
    val, _ = inst.dist.expect(lambda w: (l / q) * (1.0 - w / q) ** (l - 1), 0.0, q,
                              primitive=lambda w: -(1.0 - w / q) ** l)
    return val


def alg_value_max(inst: Instance, q: float, include_disrupting: bool = False) -> float:
    """Fixed-quantile value under the max objective (order-statistic sum)."""
    if not 0 < q <= 1:
        raise DomainError("q must lie in (0, 1]")
    c = _mu_weights(inst.n, inst.p, q, include_disrupting)
    keep = np.flatnonzero(c > 1e-18 * c.max())
    mus = np.array([mu_l(inst, q, int(l) + 1) for l in keep])
    return float(np.sum(c[keep] * mus))


def w_alg(v, n: int, p: float, q: float):
    """``W(v)`` of the single-integral form; constant for ``v >= q``."""
    v = np.minimum(np.asarray(v, dtype=float), q)
    a = (1.0 - p) * v / (p * q + (1.0 - p) * v)
    with np.errstate(divide="ignore"):
        b = -np.expm1(n * np.log1p(-(q * p + (1.0 - p) * v)))
    return a * b


def w_alg_prime(v, n: int, p: float, q: float):
    v = np.asarray(v, dtype=float)
    den = p * q + (1.0 - p) * v
    a = (1.0 - p) * v / den
    da = (1.0 - p) * p * q / den ** 2
    base = 1.0 - q * p - (1.0 - p) * v
    with np.errstate(divide="ignore"):
        b = -np.expm1(n * np.log1p(-(q * p + (1.0 - p) * v)))
    db = n * (1.0 - p) * np.exp((n - 1) * np.log(np.maximum(base, 1e-300)))
    return np.where(v < q, da * b + a * db, 0.0)


def alg_value_max_w(inst: Instance, q: float) -> float:
    """Single-integral form ``int_0^q W'(v) Q(v) dv``; cross-check of :func:`alg_value_max`."""
    n, p = inst.n, inst.p
    val, _ = inst.dist.expect(lambda v: w_alg_prime(v, n, p, q), 0.0, q,
                              primitive=lambda v: w_alg(v, n, p, q))
    return val


def bound_terms(n: int, p: float, q: float) -> tuple[float, float]:
    """``((1 - (1 - q p)^n) / (n p q), 1 - (1 - q)^n)``."""
    hit = 1.0 if q * p >= 1.0 else -math.expm1(n * math.log1p(-q * p))
    a = hit / (n * p * q)
    b = -math.expm1(n * math.log1p(-q)) if q < 1 else 1.0
    return a, b


def cr_lower_bound_max(n: int, p: float) -> tuple[float, float]:
    """Best ``lam = n q`` and ``max_q min`` of the two bound terms.

    The first term decreases in ``q`` and the second increases, so the
    optimum is their crossing, or ``q = 1`` if they do not cross.
    """
    if n < 1 or not 0 < p <= 1:
        raise DomainError("need n >= 1 and p in (0, 1]")
    a1, b1 = bound_terms(n, p, 1.0)
    if a1 >= b1:
        return float(n), b1

    def gap(q):
        a, b = bound_terms(n, p, q)
        return a - b

    q = brentq(gap, 1e-15, 1.0, xtol=1e-16, rtol=1e-15, maxiter=500)
    return n * q, min(bound_terms(n, p, q))


def r_func(v, n: int, p: float, q: float):
    """``R(v) = (v/q) / (p + (1-p) v/q) * (1 - (1 - q p - (1-p) v)^n) / (1 - (1 - v)^n)``."""
    v = np.asarray(v, dtype=float)
    s = v / q
    with np.errstate(divide="ignore"):
        num = -np.expm1(n * np.log1p(-(q * p + (1.0 - p) * v)))
        den = -np.expm1(n * np.log1p(-v))
    return s / (p + (1.0 - p) * s) * num / den


@dataclass(frozen=True)
class MaxVariantReport:
    q: float
    alg_value: float
    opt_value: float
    ratio: float
    lower_bound: float


def report(inst: Instance, q: float | None = None) -> MaxVariantReport:
    """Value and guarantee at ``q`` (default: the bound-maximizing quantile)."""
    if q is None:
        lam, _ = cr_lower_bound_max(inst.n, inst.p)
        q = min(1.0, lam / inst.n)
    alg = alg_value_max(inst, q)
    opt = opt_value_max(inst)
    return MaxVariantReport(q, alg, opt, alg / opt, min(bound_terms(inst.n, inst.p, q)))


# -- tight instance in the large-n regime -------------------------------------


def f_curve(t, a1: float, a2: float, p: float):
    """``a2 (1 - e^{-t}) + (a1 / p)(1 - e^{-p t}) / t``."""
    t = np.asarray(t, dtype=float)
    return a2 * -np.expm1(-t) + a1 * -np.expm1(-p * t) / (p * t)


def r2_curve(t, a1: float, a2: float, p: float, beta: float):
    """Value beyond the block of ``a2`` values, for ``t >= beta``."""
    t = np.asarray(t, dtype=float)
    y = p * t + (1.0 - p) * beta
    return (a1 * (1.0 - p) / p * -np.expm1(-p * t) / t
            + a2 * (1.0 - p / (p + (1.0 - p) * beta / t) * -np.expm1(-y) - np.exp(-y)))


def is_quasiconcave(values, tol: float = 0.0) -> bool:
    """Discrete derivative changes sign from + to - at most once."""
    d = np.diff(np.asarray(values, dtype=float))
    s = np.sign(np.where(np.abs(d) <= tol, 0.0, d))
    s = s[s != 0]
    return not np.any((s[:-1] < 0) & (s[1:] > 0))


def _sup_f(a1, a2, p, lo, hi):
    grid = np.geomspace(max(lo, 1e-9), hi, 1024)
    vals = f_curve(grid, a1, a2, p)
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(lambda t: -float(f_curve(t, a1, a2, p)), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    return max(float(vals[k]), -float(res.fun))


def hard_instance_max(a1: float, a2: float, beta: float, p: float, n: int | None = None) -> float:
    """Large-``n`` ratio of the best fixed quantile on the tight instance."""
    if a1 < 0 or a2 < 0 or a1 + a2 == 0:
        raise InvalidInstanceError("need a1, a2 >= 0, not both zero")
    if n is not None and beta > n:
        raise InvalidInstanceError("beta must not exceed n")
    opt = (1.0 - p) * (a1 + a2 * -math.expm1(-beta))
    alg = (1.0 - p) * _sup_f(a1, a2, p, 1e-9, beta)
    hi = max(beta, 2.0 / p)
    if hi > beta:
        ts = np.linspace(beta, hi, 257)
        alg = max(alg, float(np.max(r2_curve(ts, a1, a2, p, beta))))
    return alg / opt


def equalizing_weights(p: float) -> tuple[float, float]:
    """Weights ``(a1, a2)`` on the simplex for which ``f`` peaks at ``lambda(p)``."""
    lam = lambda_p(p)
    # f'(lam) = 0: a2 e^{-lam} = a1 (1 - e^{-p lam}(1 + p lam)) / (p lam^2)
    g = (1.0 - math.exp(-p * lam) * (1.0 + p * lam)) / (p * lam * lam)
    e = math.exp(-lam)
    a1 = e / (e + g)
    return a1, 1.0 - a1


def ratio_curve(ps) -> np.ndarray:
    """Rows ``(p, lambda(p), 1 - e^{-lambda(p)})``."""
    rows = []
    for p in ps:
        lam = lambda_p(float(p))
        rows.append((float(p), lam, -math.expm1(-lam)))
    return np.array(rows)

