"""The clairvoyant benchmark: knows every value, not the disruption outcomes.

It collects the top ``min(D - 1, n)`` order statistics plus ``zeta`` times
the ``D``-th when ``D <= n``, with ``D`` geometric. Two quantile-space forms
of its value are available:

* the weight form ``int_0^1 Q(q) g(q) dq`` with
  ``g(q) = n (1 - (1 - zeta) p) (1 - p q)^{n-1}``;
* the density form ``Q(1) W(1) + sum_jumps W(v) dQ + int W(v) r(v) dv`` with
  ``r = -Q'`` and ``W(v) = sum_j c_j P[Bin(n, v) >= j]``,
  ``c_j = P[D > j] + zeta P[D = j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlog1py, xlogy

from ._quad import simpson
from .dist import Instance
from .errors import DomainError
from .mc import Estimate, run_blocks

GEOM_TAIL = 1e-14


def geometric_cutoff(p: float, tail: float = GEOM_TAIL) -> int:
    """Smallest ``j`` with ``(1 - p)^j <= tail``."""
    return max(1, math.ceil(math.log(tail) / math.log1p(-p)))


def g_n(p, q, n, zeta=0.0):
    """``n (1 - (1 - zeta) p) (1 - p q)^{n-1}``; vectorized in ``q``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(q > 1):
        raise DomainError("q must lie in [0, 1]")
    out = n * (1.0 - (1.0 - zeta) * p) * np.exp((n - 1) * np.log1p(-p * q))
    return float(out) if out.ndim == 0 else out


def g_primitive(p, q, n, zeta=0.0):
    """``int_0^q g_n``: ``(1 - (1 - zeta) p)(1 - (1 - p q)^n) / p``."""
    q = np.asarray(q, dtype=float)
    return (1.0 - (1.0 - zeta) * p) * -np.expm1(n * np.log1p(-p * q)) / p


def binom_pmf(k, n: int, v):
    """Binomial pmf in log space; scipy's ``binom.pmf`` overflows near the smallest normal float."""
    k = np.asarray(k, dtype=float)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(logc + xlogy(k, v) + xlog1py(n - k, -v))


def b_n(p: float, v: float, n: int) -> float:
    """``E[min(Bin(n, v), D - 1, n)]`` by explicit double summation.

    The geometric support is cut at ``j*`` with ``(1 - p)^{j*} <= 1e-14``; the
    remaining mass is assigned ``D - 1 = j*``.
    """
    if not 0 <= v <= 1:
        raise DomainError("v must lie in [0, 1]")
    k = np.arange(n + 1)
    pk = binom_pmf(k, n, v)
    js = geometric_cutoff(p)
    d = np.arange(1, js + 1)
    pd = p * (1.0 - p) ** (d - 1)
    tail = (1.0 - p) ** js
    inner = np.minimum(np.minimum(k[:, None], d[None, :] - 1), n) @ pd
    inner += tail * np.minimum(k, js)
    return float(math.fsum(pk * inner))


def order_weight(p, v, n, zeta=0.0):
    """``W(v) = sum_j c_j P[Bin(n, v) >= j]`` with ``c_j = (1-p)^j + zeta p (1-p)^{j-1}``.

    Evaluated as ``E[C(Bin(n, v))]`` with ``C(k) = sum_{j<=k} c_j``; ``C`` is
    flat beyond the point where ``(1 - p)^j`` underflows the tolerance.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    J = min(n, geometric_cutoff(p, 1e-18))
    j = np.arange(1, J + 1)
    c = (1.0 - p) ** j + zeta * p * (1.0 - p) ** (j - 1)
    C = np.concatenate([[0.0], np.cumsum(c)])
    k = np.arange(J)
    lv = np.log(np.clip(v, 1e-300, 1.0))[:, None]
    l1v = np.log1p(-np.clip(v, 0.0, 1.0 - 1e-16))[:, None]
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    pmf = np.exp(logc[None, :] + k[None, :] * lv + (n - k)[None, :] * l1v)
    pmf[v == 0.0, :] = 0.0
    pmf[v == 0.0, 0] = 1.0
    pmf[v == 1.0, :] = 0.0
    below = pmf @ C[:J]
    # P[Bin >= J] from the lower tail when it is large, else summed directly
    rest = np.clip(1.0 - pmf.sum(axis=1), 0.0, None)
    small = rest < 0.5
    if np.any(small):
        rest[small] = stats.binom.sf(J - 1, n, v[small])
    return below + C[J] * rest


@dataclass(frozen=True)
class OptValueBreakdown:
    """Benchmark value with provenance.

    Attributes
    ----------
    value : float
        Benchmark value.
    by_formula : str
        ``"weight"`` for the ``int Q g`` form.
    quadrature_error_estimate : float
        Error estimate of the quadrature that produced ``value``.
    alt_value : float or None
        Density-form value when the distribution has a derivative.
    alt_error_estimate : float or None
    """

    value: float
    by_formula: str
    quadrature_error_estimate: float
    alt_value: float | None = None
    alt_error_estimate: float | None = None

    @property
    def relative_gap(self) -> float | None:
        if self.alt_value is None:
            return None
        return abs(self.value - self.alt_value) / max(abs(self.value), 1e-300)


def opt_value_weight_form(inst: Instance, rtol: float = 1e-12) -> tuple[float, float]:
    n, p, z = inst.n, inst.p, inst.zeta
    return inst.dist.expect(lambda q: g_n(p, q, n, z), 0.0, 1.0,
                            primitive=lambda q: g_primitive(p, q, n, z), rtol=rtol)


def opt_value_density_form(inst: Instance, rtol: float = 1e-12) -> tuple[float, float]:
    """Density form; requires derivatives on every continuous piece."""
    d = inst.dist
    if not d.has_density:
        raise DomainError("density form needs a differentiable quantile function")
    n, p, z = inst.n, inst.p, inst.zeta

    def W(v):
        return order_weight(p, v, n, z)

    total = d.bottom_value() * float(W(1.0)[0])
    for v, size in d.jumps():
        total += size * float(W(v)[0])
    err = 0.0
    for (lo, hi), pc in zip(d.bounds, d.pieces):
        if not hasattr(pc, "deriv"):
            continue
        val, e = simpson(lambda v, pc=pc: -pc.deriv(v) * W(v), lo, hi, rtol=rtol, atol=1e-15,
                         breakpoints=pc.knots)
        total += val
        err += e
    return total, err


def opt_value(inst: Instance, *, check: bool = True) -> OptValueBreakdown:
    """Clairvoyant benchmark value ``v(OPT)``.

    With ``check`` and a differentiable quantile function the density form is
    evaluated too and stored in ``alt_value``.
    """
    val, err = opt_value_weight_form(inst)
    alt = alt_err = None
    if check and inst.dist.has_density:
        alt, alt_err = opt_value_density_form(inst)
    return OptValueBreakdown(val, "weight", err, alt, alt_err)


def _opt_block(inst: Instance):
    n, p, zeta = inst.n, inst.p, inst.zeta

    def fn(rng, size):
        x = inst.dist.sample(rng, (size, n))
        x = -np.sort(-x, axis=1)
        prefix = np.concatenate([np.zeros((size, 1)), np.cumsum(x, axis=1)], axis=1)
        d = rng.geometric(p, size)
        m = np.minimum(d - 1, n)
        rows = np.arange(size)
        pay = prefix[rows, m]
        hit = d <= n
        pay[hit] += zeta * x[rows[hit], d[hit] - 1]
        return pay

    return fn


def opt_value_mc(inst: Instance, trials: int, seed: int, *, workers: int = 1) -> Estimate:
    """Monte Carlo ``v(OPT)``: sort each draw, then cut at a geometric ``D``."""
    return Estimate.from_samples(run_blocks(_opt_block(inst), trials, seed, stream=2, workers=workers))
