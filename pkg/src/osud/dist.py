"""Value distributions in upper-quantile form and OS-UD instances.

A distribution is stored through ``Q(q) = F^{-1}(1 - q)`` for ``q`` in
``(0, 1]``: small ``q`` means a high value. ``Q`` is a concatenation of
segments, each an atom (constant value over a mass interval) or a continuous
nonincreasing piece.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._quad import simpson
from .errors import DomainError, InvalidInstanceError

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Atom:
    """Point mass ``mass`` at ``value``."""

    mass: float
    value: float


@dataclass(frozen=True, eq=False)
class Continuous:
    """Continuous quantile segment on ``(q_lo, q_hi]``.

    Parameters
    ----------
    q_lo, q_hi : float
        Quantile interval covered by the segment.
    fn : callable
        Vectorized ``q -> Q(q)``, nonincreasing.
    deriv : callable, optional
        Vectorized ``dQ/dq``. Needed for the density form of the benchmark.
    primitive : callable, optional
        Vectorized antiderivative of ``fn``. Enables exact partial
        expectations.
    knots : tuple of float
        Points where ``fn`` has kinks, used to seed quadrature.
    table : ndarray, optional
        ``(m, 2)`` array of ``[q, value]`` rows when built from a table.
    """

    q_lo: float
    q_hi: float
    fn: Callable
    deriv: Callable | None = None
    primitive: Callable | None = None
    knots: tuple = ()
    table: np.ndarray | None = None

    @classmethod
    def from_table(cls, qs, values) -> "Continuous":
        """Linear interpolation through ``(q, value)`` rows."""
        qs = np.asarray(qs, dtype=float)
        vs = np.asarray(values, dtype=float)
        if qs.ndim != 1 or qs.shape != vs.shape or qs.size < 2:
            raise InvalidInstanceError("table needs at least two matching q/value rows")
        if np.any(np.diff(qs) <= 0):
            raise InvalidInstanceError("table quantiles must be strictly increasing")
        slopes = np.diff(vs) / np.diff(qs)
        # cumulative trapezoid integrals at the knots (exact for linear pieces)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(qs))])

        def fn(q):
            return np.interp(q, qs, vs)

        def deriv(q):
            k = np.clip(np.searchsorted(qs, q, side="right") - 1, 0, slopes.size - 1)
            return slopes[k]

        def primitive(q):
            q = np.asarray(q, dtype=float)
            k = np.clip(np.searchsorted(qs, q, side="right") - 1, 0, slopes.size - 1)
            dq = q - qs[k]
            return cum[k] + vs[k] * dq + 0.5 * slopes[k] * dq * dq

        return cls(float(qs[0]), float(qs[-1]), fn, deriv, primitive, tuple(qs[1:-1]),
                   np.column_stack([qs, vs]))


class QuantileDistribution:
    """Nonnegative distribution given by its upper-quantile function.

    Parameters
    ----------
    pieces : sequence of Atom or Continuous
        Segments ordered from the top of the distribution (``q`` near 0)
        downward. Their masses must tile ``(0, 1]``.
    """

    def __init__(self, pieces: Sequence[Atom | Continuous]):
        pieces = [pc for pc in pieces if not (isinstance(pc, Atom) and pc.mass == 0.0)]
        if not pieces:
            raise InvalidInstanceError("distribution needs at least one piece")
        lo, hi = [], []
        pos = 0.0
        for pc in pieces:
            if isinstance(pc, Atom):
                if not (pc.mass > 0 and math.isfinite(pc.value) and pc.value >= 0):
                    raise InvalidInstanceError(f"invalid atom {pc}")
                lo.append(pos)
                pos += pc.mass
                hi.append(pos)
            elif isinstance(pc, Continuous):
                if abs(pc.q_lo - pos) > MASS_TOL or not pc.q_hi > pc.q_lo:
                    raise InvalidInstanceError(
                        f"continuous piece ({pc.q_lo}, {pc.q_hi}] does not start at {pos}")
                lo.append(pc.q_lo)
                pos = pc.q_hi
                hi.append(pos)
            else:
                raise TypeError(f"unknown piece type {type(pc).__name__}")
        if abs(pos - 1.0) > MASS_TOL:
            raise InvalidInstanceError(f"segment masses sum to {pos!r}, not 1")
        self._pieces = tuple(pieces)
        self._lo = np.array(lo)
        self._hi = np.array(hi)
        self._hi[-1] = 1.0
        self._validate_shape()
        self._cum = np.concatenate([[0.0], np.cumsum([self._piece_integral(k) for k in range(len(pieces))])])

    # -- construction helpers -------------------------------------------------

    def _left_value(self, k):
        pc = self._pieces[k]
        return pc.value if isinstance(pc, Atom) else float(pc.fn(np.array([self._lo[k]]))[0])

    def _right_value(self, k):
        pc = self._pieces[k]
        return pc.value if isinstance(pc, Atom) else float(pc.fn(np.array([self._hi[k]]))[0])

    def _validate_shape(self):
        prev = math.inf
        for k, pc in enumerate(self._pieces):
            if isinstance(pc, Continuous):
                grid = np.linspace(self._lo[k], self._hi[k], 257)
                vals = np.asarray(pc.fn(grid), dtype=float)
                if not np.all(np.isfinite(vals)) or vals.min() < 0:
                    raise InvalidInstanceError("continuous piece has negative or non-finite values")
                if np.any(np.diff(vals) > 1e-12 * max(1.0, abs(vals).max())):
                    raise InvalidInstanceError("quantile function must be nonincreasing")
                top, bottom = vals[0], vals[-1]
            else:
                top = bottom = pc.value
            if top > prev * (1 + 1e-12) + 1e-300:
                raise InvalidInstanceError("quantile function must be nonincreasing across pieces")
            prev = bottom

    def _piece_integral(self, k):
        return self._segment_integral(k, self._lo[k], self._hi[k])

    def _segment_integral(self, k, a, b):
        pc = self._pieces[k]
        if b <= a:
            return 0.0
        if isinstance(pc, Atom):
            return pc.value * (b - a)
        if pc.primitive is not None:
            return float(pc.primitive(np.array([b]))[0] - pc.primitive(np.array([a]))[0])
        return simpson(pc.fn, a, b, breakpoints=pc.knots)[0]

    # -- accessors ------------------------------------------------------------

    @property
    def pieces(self) -> tuple:
        return self._pieces

    @property
    def bounds(self) -> list[tuple[float, float]]:
        """Quantile interval ``(lo, hi]`` of every piece."""
        return list(zip(self._lo.tolist(), self._hi.tolist()))

    @property
    def breakpoints(self) -> np.ndarray:
        """Piece boundaries and table knots, for seeding quadrature."""
        pts = [self._lo[1:]]
        for k, pc in enumerate(self._pieces):
            if isinstance(pc, Continuous) and pc.knots:
                pts.append(np.asarray(pc.knots, dtype=float))
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    @property
    def has_density(self) -> bool:
        """True when every continuous piece carries a derivative."""
        return all(isinstance(pc, Atom) or pc.deriv is not None for pc in self._pieces)

    def mean(self) -> float:
        return float(self._cum[-1])

    def bottom_value(self) -> float:
        """``Q(1)``, the essential infimum."""
        return self._right_value(len(self._pieces) - 1)

    def jumps(self) -> list[tuple[float, float]]:
        """``(q, size)`` for every downward jump of ``Q`` at a piece boundary."""
        out = []
        for k in range(1, len(self._pieces)):
            size = self._right_value(k - 1) - self._left_value(k)
            if size > 0:
                out.append((float(self._lo[k]), size))
        return out

    # -- core operations ------------------------------------------------------

    def _piece_index(self, q):
        return np.minimum(np.searchsorted(self._hi, q, side="left"), len(self._pieces) - 1)

    def inverse_cdf(self, q):
        """Return ``F^{-1}(1 - q)`` for ``q`` in ``(0, 1]``.

        Accepts scalars or arrays; atoms return their value across their whole
        mass interval.
        """
        arr = np.asarray(q, dtype=float)
        if np.any(~(arr > 0)) or np.any(arr > 1):
            raise DomainError("inverse_cdf needs q in (0, 1]")
        flat = arr.ravel()
        idx = self._piece_index(flat)
        out = np.empty_like(flat)
        for k in np.unique(idx):
            m = idx == k
            pc = self._pieces[k]
            out[m] = pc.value if isinstance(pc, Atom) else pc.fn(flat[m])
        out = out.reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def partial_expectation(self, q):
        """Return ``int_0^q Q(u) du`` for ``q`` in ``[0, 1]``."""
        arr = np.asarray(q, dtype=float)
        if np.any(~(arr >= 0)) or np.any(arr > 1):
            raise DomainError("partial_expectation needs q in [0, 1]")
        flat = arr.ravel()
        idx = np.minimum(np.searchsorted(self._hi, flat, side="left"), len(self._pieces) - 1)
        out = np.empty_like(flat)
        for j, (k, x) in enumerate(zip(idx, flat)):
            out[j] = self._cum[k] + self._segment_integral(k, self._lo[k], min(x, self._hi[k]))
        out = out.reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    def expect(self, weight, a=0.0, b=1.0, *, primitive=None, rtol=1e-11, atol=1e-15):
        """Return ``int_a^b Q(u) w(u) du`` and an error estimate.

        Parameters
        ----------
        weight : callable
            Vectorized weight ``w``.
        primitive : callable, optional
            Antiderivative of ``w``; makes atom contributions exact.
        """
        total = 0.0
        err = 0.0
        for k, pc in enumerate(self._pieces):
            lo, hi = max(a, self._lo[k]), min(b, self._hi[k])
            if hi <= lo:
                continue
            if isinstance(pc, Atom):
                if pc.value == 0.0:
                    continue
                if primitive is not None:
                    v = float(primitive(np.array([hi]))[0] - primitive(np.array([lo]))[0])
                    e = 0.0
                else:
                    v, e = simpson(weight, lo, hi, rtol=rtol, atol=atol)
                total += pc.value * v
                err += pc.value * e
            else:
                v, e = simpson(lambda u, pc=pc: pc.fn(u) * weight(u), lo, hi,
                               rtol=rtol, atol=atol, breakpoints=pc.knots)
                total += v
                err += e
        return total, err

    def sample(self, rng: np.random.Generator, size=None):
        """Draw ``Q(U)`` with ``U`` uniform on ``(0, 1]``."""
        return self.inverse_cdf(1.0 - rng.random(size))

    def sample_with_quantile(self, rng: np.random.Generator, size=None):
        """Draw values together with their quantiles ``U``.

        Within an atom the quantile is uniform over its mass interval, which
        gives randomized tie-breaking for quantile thresholds.
        """
        u = 1.0 - rng.random(size)
        return self.inverse_cdf(u), u

    def is_nonincreasing(self, points: int = 1000) -> bool:
        grid = np.linspace(1.0 / points, 1.0, points)
        v = self.inverse_cdf(grid)
        return bool(np.all(np.diff(v) <= 1e-12 * max(1.0, float(np.max(v)))))

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = []
        for pc in self._pieces:
            if isinstance(pc, Atom):
                out.append({"kind": "atom", "mass": pc.mass, "value": pc.value})
            else:
                if pc.table is None:
                    raise ValueError("only table-defined continuous pieces are serializable")
                out.append({"kind": "continuous", "q_lo": pc.q_lo, "q_hi": pc.q_hi,
                            "table": pc.table.tolist()})
        return {"pieces": out}

    @classmethod
    def from_dict(cls, data: dict) -> "QuantileDistribution":
        pieces = []
        for raw in data["pieces"]:
            kind = raw.get("kind")
            if kind == "atom":
                pieces.append(Atom(float(raw["mass"]), float(raw["value"])))
            elif kind == "continuous":
                tab = np.asarray(raw["table"], dtype=float)
                if tab.ndim != 2 or tab.shape[1] != 2:
                    raise InvalidInstanceError("continuous table rows must be [q, value]")
                if abs(tab[0, 0] - raw["q_lo"]) > MASS_TOL or abs(tab[-1, 0] - raw["q_hi"]) > MASS_TOL:
                    raise InvalidInstanceError("table must span [q_lo, q_hi]")
                pieces.append(Continuous.from_table(tab[:, 0], tab[:, 1]))
            else:
                raise InvalidInstanceError(f"unknown piece kind {kind!r}")
        return cls(pieces)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QuantileDistribution":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        kinds = ",".join("A" if isinstance(pc, Atom) else "C" for pc in self._pieces)
        return f"QuantileDistribution(pieces=[{kinds}], mean={self.mean():.6g})"


@dataclass(frozen=True)
class Instance:
    """An OS-UD problem: horizon, value distribution, disruption and recovery."""

    n: int
    dist: QuantileDistribution = field(repr=False)
    p: float
    zeta: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInstanceError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.p < 1.0:
            raise InvalidInstanceError(f"p must lie in (0, 1), got {self.p!r}")
        if not 0.0 <= self.zeta <= 1.0:
            raise InvalidInstanceError(f"zeta must lie in [0, 1], got {self.zeta!r}")
        object.__setattr__(self, "n", int(self.n))

    def step_dist(self, i: int) -> QuantileDistribution:
        return self.dist

    @property
    def recovery_factor(self) -> float:
        """``1 - (1 - zeta) p``, the expected share kept from one acceptance."""
        return 1.0 - (1.0 - self.zeta) * self.p


# -- library of distributions -------------------------------------------------


def point_mass(c: float) -> QuantileDistribution:
    return QuantileDistribution([Atom(1.0, float(c))])


def uniform(a: float = 0.0, b: float = 1.0) -> QuantileDistribution:
    """Uniform on ``[a, b]``: ``Q(q) = b - q (b - a)``."""
    a, b = float(a), float(b)
    if not 0 <= a < b:
        raise InvalidInstanceError("uniform needs 0 <= a < b")
    w = b - a
    return QuantileDistribution([Continuous(
        0.0, 1.0,
        fn=lambda q: b - w * np.asarray(q, dtype=float),
        deriv=lambda q: np.full(np.shape(q), -w),
        primitive=lambda q: b * np.asarray(q, dtype=float) - 0.5 * w * np.asarray(q, dtype=float) ** 2,
    )])


def from_quantile_function(fn, deriv=None, primitive=None, knots=()) -> QuantileDistribution:
    """Single continuous piece over ``(0, 1]``."""
    return QuantileDistribution([Continuous(0.0, 1.0, fn, deriv, primitive, tuple(knots))])


def from_table(qs, values) -> QuantileDistribution:
    """Piecewise-linear quantile function through the given rows."""
    return QuantileDistribution([Continuous.from_table(qs, values)])


def hard_instance_dist(a1: float, a2: float, beta: float, n: int, spike_width: float | None = None):
    """Tight instance for fixed-quantile thresholds.

    The quantile function is a spike of integral ``a1 / n`` at ``q = 0``, the
    value ``a2`` on quantiles up to ``beta / n`` and zero beyond. The spike is
    realized as an atom of mass ``spike_width`` (default ``1 / n**2``) whose
    value carries the spike integral on top of ``a2``, so that
    ``partial_expectation(q) = a1 / n + a2 min(q, beta / n)`` for every
    ``q >= spike_width``.
    """
    if a1 < 0 or a2 < 0 or (a1 == 0 and a2 == 0):
        raise InvalidInstanceError("need a1, a2 >= 0, not both zero")
    if not 0 < beta <= n:
        raise InvalidInstanceError(f"beta must lie in (0, n], got beta={beta}, n={n}")
    w = 1.0 / (float(n) * n) if spike_width is None else float(spike_width)
    top = beta / n
    if a2 > 0 and not 0 < w < top:
        raise InvalidInstanceError("spike_width must be smaller than beta / n")
    if a1 == 0:
        return QuantileDistribution([Atom(top, a2), Atom(1.0 - top, 0.0)])
    pieces = [Atom(w, a1 / (n * w) + (a2 if a2 > 0 else 0.0))]
    if a2 > 0:
        pieces.append(Atom(top - w, a2))
        pieces.append(Atom(1.0 - top, 0.0))
    else:
        pieces.append(Atom(1.0 - w, 0.0))
    return QuantileDistribution(pieces)


def upper_bound_dist(eps: float, p: float, n: int, y, zeta: float = 0.0,
                     spike_width: float | None = None) -> QuantileDistribution:
    """Worst-case instance for adaptive thresholds built on the Hill-Kertz curve.

    The continuous part is ``(p / c) int_{y^{-1}(e^{-pnu})}^{1-eps} -1/y'(s) ds``
    with ``c = 1 - p + p zeta``; a spike of integral ``theta / (c n)`` sits
    at ``q = 0``. The spike is an atom of mass ``spike_width`` (default
    ``1 / n**2``) holding the spike plus the continuous mass it covers.
    """
    from ._ubprofile import UpperBoundProfile

    prof = UpperBoundProfile.build(y, eps, p, n)
    c = 1.0 - p + p * zeta
    w = 1.0 / (float(n) * n) if spike_width is None else float(spike_width)
    scale = p / c

    def fn(u):
        return scale * prof.G_of_r(p * n * np.asarray(u, dtype=float))

    def primitive(u):
        # int_0^u G(e^{-p n s}) ds = K(p n u) / (p n) with K(r) = int_0^r G
        return scale * prof.K_of_r(p * n * np.asarray(u, dtype=float)) / (p * n)

    def deriv(u):
        return scale * p * n * prof.dG_of_r(p * n * np.asarray(u, dtype=float))

    spike = y.theta / (c * n)
    head = float(primitive(np.array([w]))[0])
    return QuantileDistribution([
        Atom(w, (spike + head) / w),
        Continuous(w, 1.0, fn, deriv, primitive),
    ])
