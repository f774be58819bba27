"""Named smooth distributions used by tests and the acceptance suite.

Every entry has a closed-form quantile function ``Q(q) = F^{-1}(1 - q)`` and
its derivative, so both benchmark forms apply.
"""

from __future__ import annotations

import math

import numpy as np

from .dist import QuantileDistribution, from_quantile_function, uniform


def _trunc_exp(L: float) -> QuantileDistribution:
    c = -math.expm1(-L)
    lo = math.exp(-L)
    return from_quantile_function(
        lambda q: -np.log(lo + np.asarray(q) * c),
        deriv=lambda q: -c / (lo + np.asarray(q) * c),
    )


def _power(k: float) -> QuantileDistribution:
    return from_quantile_function(
        lambda q: (1.0 - np.asarray(q)) ** k,
        deriv=lambda q: -k * (1.0 - np.asarray(q)) ** (k - 1),
        primitive=lambda q: (1.0 - (1.0 - np.asarray(q)) ** (k + 1)) / (k + 1),
    )


def _top_heavy(k: float) -> QuantileDistribution:
    # Q = 1 - q^k keeps most mass near the top value
    return from_quantile_function(
        lambda q: 1.0 - np.asarray(q) ** k,
        deriv=lambda q: -k * np.asarray(q) ** (k - 1),
        primitive=lambda q: np.asarray(q) - np.asarray(q) ** (k + 1) / (k + 1),
    )


def _cosine() -> QuantileDistribution:
    h = 0.5 * math.pi
    return from_quantile_function(
        lambda q: np.cos(h * np.asarray(q)),
        deriv=lambda q: -h * np.sin(h * np.asarray(q)),
        primitive=lambda q: np.sin(h * np.asarray(q)) / h,
    )


def _log_spread() -> QuantileDistribution:
    return from_quantile_function(
        lambda q: np.log1p(9.0 * (1.0 - np.asarray(q))),
        deriv=lambda q: -9.0 / (1.0 + 9.0 * (1.0 - np.asarray(q))),
    )


def _smoothstep() -> QuantileDistribution:
    def fn(q):
        s = 1.0 - np.asarray(q)
        return 3 * s * s - 2 * s ** 3

    def deriv(q):
        s = 1.0 - np.asarray(q)
        return -(6 * s - 6 * s * s)

    return from_quantile_function(fn, deriv=deriv)


def _shifted_exp() -> QuantileDistribution:
    # 1 + Exp(2) truncated at 1 + 4
    c = -math.expm1(-8.0)
    lo = math.exp(-8.0)
    return from_quantile_function(
        lambda q: 1.0 - 0.5 * np.log(lo + np.asarray(q) * c),
        deriv=lambda q: -0.5 * c / (lo + np.asarray(q) * c),
    )


SMOOTH = {
    "uniform01": lambda: uniform(0.0, 1.0),
    "uniform12": lambda: uniform(1.0, 2.0),
    "uniform0_10": lambda: uniform(0.0, 10.0),
    "trunc_exp5": lambda: _trunc_exp(5.0),
    "trunc_exp20": lambda: _trunc_exp(20.0),
    "shifted_exp": _shifted_exp,
    "power2": lambda: _power(2.0),
    "power4": lambda: _power(4.0),
    "top_heavy2": lambda: _top_heavy(2.0),
    "top_heavy1_5": lambda: _top_heavy(1.5),
    "cosine": _cosine,
    "log_spread": _log_spread,
}


def smooth_distributions() -> dict[str, QuantileDistribution]:
    """Fresh instances of the twelve smooth fixture distributions."""
    return {name: make() for name, make in SMOOTH.items()}
