"""Exact oracles on finite supports and the quantile Bellman upper bound.

For a finite support the optimal online policy follows from backward
induction over cut points of the support. A brute-force enumerator gives an
independent value for any threshold sequence.

The upper-bound part runs the same recursion in quantile space on the
worst-case instance built from the Hill-Kertz curve. With ``mu = n q`` the
stage objective is ``(theta + K(p mu)) / n + (1 - p mu / n) D_{i+1}``, where
``K`` is tabulated in :mod:`osud._ubprofile`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._quad import simpson
from ._ubprofile import UpperBoundProfile
from .dist import Atom, Instance, QuantileDistribution
from .errors import InvalidInstanceError, NumericalError, StateSpaceError
from .hillkertz import OdeSolution, phi

STATE_LIMIT = 10_000_000
TIE_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class DiscreteInstance:
    """OS-UD instance with finite support.

    Attributes
    ----------
    n : int
    values : ndarray
        Strictly ascending nonnegative support points.
    probs : ndarray
        Positive probabilities summing to one.
    p, zeta : float
    """

    n: int
    values: np.ndarray
    probs: np.ndarray
    p: float
    zeta: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != w.shape or v.size == 0:
            raise InvalidInstanceError("values and probs must be matching 1-d arrays")
        if np.any(np.diff(v) <= 0) or v[0] < 0:
            raise InvalidInstanceError("support must be strictly ascending and nonnegative")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInstanceError("probabilities must be positive and sum to 1")
        if int(self.n) != self.n or self.n < 1 or not 0 < self.p < 1 or not 0 <= self.zeta <= 1:
            raise InvalidInstanceError("need n >= 1, p in (0, 1), zeta in [0, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", w)
        object.__setattr__(self, "n", int(self.n))

    @property
    def support_size(self) -> int:
        return self.values.size

    def to_dist(self) -> QuantileDistribution:
        """Atoms ordered from the top value down."""
        return QuantileDistribution([Atom(float(w), float(v)) for v, w in zip(self.values[::-1], self.probs[::-1])])

    def to_instance(self) -> Instance:
        return Instance(self.n, self.to_dist(), self.p, self.zeta)

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "zeta": self.zeta,
                "support": [{"value": float(v), "prob": float(w)} for v, w in zip(self.values, self.probs)]}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteInstance":
        sup = sorted(data["support"], key=lambda r: r["value"])
        return cls(int(data["n"]), np.array([r["value"] for r in sup]), np.array([r["prob"] for r in sup]),
                   float(data["p"]), float(data.get("zeta", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscreteInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class DpSolution:
    """Backward-induction values and thresholds.

    ``values[i]`` is ``D_{i+1}`` (so ``values[0] = D_1`` and
    ``values[n] = 0``). ``thresholds[i]`` is the support index of the lowest
    accepted value at step ``i + 1``; ``support_size`` means reject all.
    """

    values: np.ndarray
    thresholds: np.ndarray

    @property
    def d1(self) -> float:
        return float(self.values[0])


def _stage_values(inst: DiscreteInstance, cont: float) -> np.ndarray:
    """Value of every cut ``k`` (accept support indices ``>= k``), ``k = 0..K``."""
    x, w = inst.values, inst.probs
    p, z = inst.p, inst.zeta
    acc = w * ((1.0 - p) * (x + cont) + p * z * x)
    rej = w * cont
    # cut k accepts indices k..K-1 and rejects 0..k-1
    acc_tail = np.concatenate([np.cumsum(acc[::-1])[::-1], [0.0]])
    rej_head = np.concatenate([[0.0], np.cumsum(rej)])
    return acc_tail + rej_head


def solve(inst: DiscreteInstance) -> DpSolution:
    """Optimal online policy by backward induction; ties go to the lower cut."""
    n, K = inst.n, inst.support_size
    D = np.zeros(n + 1)
    tau = np.zeros(n, dtype=int)
    for i in range(n - 1, -1, -1):
        vals = _stage_values(inst, D[i + 1])
        best = vals.max()
        k = int(np.flatnonzero(vals >= best - TIE_RTOL * max(1.0, abs(best)))[0])
        tau[i] = k
        D[i] = vals[k]
    return DpSolution(D, tau)


def policy_value(inst: DiscreteInstance, thresholds) -> float:
    """Exact value of a cut sequence by backward recursion (no enumeration)."""
    tau = np.asarray(thresholds, dtype=int)
    D = 0.0
    for i in range(inst.n - 1, -1, -1):
        D = float(_stage_values(inst, D)[tau[i]])
    return D


def brute_force_policy_value(inst: DiscreteInstance, thresholds) -> float:
    """Exact value of a cut sequence by enumerating every value sequence.

    Disruption outcomes are summed in closed form: the ``k``-th acceptance
    along a sequence is reached with probability ``(1 - p)^{k-1}`` and then
    pays ``(1 - p + p zeta)`` times its value in expectation.
    """
    n, K = inst.n, inst.support_size
    tau = np.asarray(thresholds, dtype=int)
    if tau.shape != (n,) or np.any(tau < 0) or np.any(tau > K):
        raise ValueError("thresholds must be n support indices in 0..K")
    if K ** n * (n + 1) > STATE_LIMIT:
        raise StateSpaceError(f"{K}^{n} sequences exceed the enumeration guard")
    idx = np.array(list(itertools.product(range(K), repeat=n)), dtype=np.int64).reshape(-1, n)
    logw = np.log(inst.probs)[idx].sum(axis=1)
    prob = np.exp(logw)
    acc = idx >= tau[None, :]
    order = np.cumsum(acc, axis=1) - 1  # acceptance rank at each step
    keep = (1.0 - inst.p) ** np.where(acc, order, 0) * (1.0 - inst.p + inst.p * inst.zeta)
    pay = np.where(acc, keep * inst.values[idx], 0.0).sum(axis=1)
    return math.fsum((prob * pay).tolist())


def fixed_cut_values(inst: DiscreteInstance) -> np.ndarray:
    """Brute-force value of every constant cut ``k = 0..K``."""
    return np.array([brute_force_policy_value(inst, np.full(inst.n, k)) for k in range(inst.support_size + 1)])


def random_instance(rng: np.random.Generator, max_n: int = 8, max_support: int = 5) -> DiscreteInstance:
    """Random small instance for oracle comparisons."""
    n = int(rng.integers(1, max_n + 1))
    K = int(rng.integers(1, max_support + 1))
    vals = np.sort(rng.choice(np.arange(0, 101), size=K, replace=False) / 10.0)
    probs = rng.dirichlet(np.ones(K))
    probs = probs / probs.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    if probs[-1] <= 0:
        probs = np.full(K, 1.0 / K)
    p = float(rng.uniform(0.05, 0.95))
    zeta = float(rng.choice([0.0, 0.5, 1.0, rng.uniform()]))
    return DiscreteInstance(n, vals, probs, p, zeta)


# -- quantile Bellman recursion for the upper bound -----------------------------

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Maximizer and maximum of a unimodal ``f`` on ``[a, b]``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    best = max(cands)
    return best[1], best[0]


@dataclass(frozen=True, eq=False)
class BellmanResult:
    """``values[i] = D_{i+1}`` and the maximizing ``mu = n q`` per step."""

    values: np.ndarray
    mu: np.ndarray
    profile: UpperBoundProfile = field(repr=False)

    @property
    def d1(self) -> float:
        return float(self.values[0])


def _unimodal(v: np.ndarray, tol: float) -> bool:
    d = np.diff(v)
    up = d > tol
    down = d < -tol
    if not down.any():
        return True
    first_down = int(np.argmax(down))
    return not up[first_down:].any()


def bellman_values(eps: float, p: float, n: int, y: OdeSolution, zeta: float = 0.0, *,
                   check_unimodal: bool = False, profile: UpperBoundProfile | None = None) -> BellmanResult:
    """Backward induction of the quantile Bellman recursion.

    ``eps = 0`` runs the limiting recursion without the floor on ``n``. The
    recursion is the same for every ``zeta`` once the instance is rescaled by
    ``1 - p + p zeta``, so ``zeta`` only enters the validation.
    """
    if not 0 <= zeta <= 1:
        raise InvalidInstanceError("zeta must lie in [0, 1]")
    prof = profile or UpperBoundProfile.build(y, eps, p, n, check_floor=eps > 0)
    theta = y.theta
    mu_hi = min(float(n), prof.r_max / p)
    G, dG, J, dJ, h = prof.G, prof.dG, prof.J, prof.dJ, prof.h
    J0 = float(J[0])
    r_max = prof.r_max
    last = G.size - 2

    def K(r):
        # scalar Hermite evaluation of K(r) = r G(r) + J(0) - J(r)
        if r >= r_max:
            return J0
        x = r / h
        k = min(int(x), last)
        s = x - k
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        g = h00 * G[k] + h10 * h * dG[k] + h01 * G[k + 1] + h11 * h * dG[k + 1]
        j = h00 * J[k] + h10 * h * dJ[k] + h01 * J[k + 1] + h11 * h * dJ[k + 1]
        return r * g + J0 - j

    G = G.tolist()
    dG = dG.tolist()
    J = J.tolist()
    dJ = dJ.tolist()
    D = np.zeros(n + 1)
    mus = np.zeros(n)
    nf = float(n)
    for i in range(n - 1, -1, -1):
        cont = D[i + 1]

        def f(mu, cont=cont):
            return (theta + K(p * mu)) / nf + (1.0 - p * mu / nf) * cont

        mu, val = golden_section_max(f, 0.0, mu_hi, tol=1e-13)
        if check_unimodal:
            grid = np.linspace(0.0, mu_hi, 128)
            fv = np.array([f(m) for m in grid])
            scale = 1e-13 * max(1.0, abs(val))
            if not _unimodal(fv, scale) or fv.max() > val + scale:
                raise NumericalError(f"stage objective is not unimodal at step {i + 1}")
        D[i] = val
        mus[i] = mu
    return BellmanResult(D, mus, prof)


def bellman_upper_bound(eps: float, p: float, n: int, y: OdeSolution, zeta: float = 0.0, *,
                        check_unimodal: bool = False) -> float:
    """``D_1^eps`` of the quantile Bellman recursion on the worst-case instance."""
    return bellman_values(eps, p, n, y, zeta, check_unimodal=check_unimodal).d1


def opt_value_eps(eps: float, p: float, n: int, y: OdeSolution) -> float:
    """Benchmark on the worst-case instance.

    ``theta - int_0^{1-eps} (1/y'(s)) (1 - (1 + ln y(s) / n)^n) ds``. The
    integrand is negative, so the value exceeds ``theta``.
    """
    UpperBoundProfile.build(y, eps, p, n)  # floor check
    beta = y.beta

    def integrand(s):
        yy = np.asarray(y.y(s), dtype=float)
        return (1.0 / phi(yy, beta)) * -np.expm1(n * np.log1p(np.log(yy) / n))

    val, _ = simpson(integrand, 0.0, 1.0 - eps, rtol=1e-12, atol=1e-15)
    return y.theta - val


def opt_value_eps_limit(eps: float, y: OdeSolution) -> float:
    """Large-``n`` limit ``theta - int_0^{1-eps} (1 - y) / y' ds``."""
    beta = y.beta

    def integrand(s):
        yy = np.asarray(y.y(s), dtype=float)
        return (1.0 - yy) / phi(yy, beta)

    return y.theta - simpson(integrand, 0.0, 1.0 - eps, rtol=1e-12, atol=1e-15)[0]


def continuation_value(x, y: OdeSolution, profile: UpperBoundProfile | None = None):
    """``d(x) = int_x^1 -1/y'(s) ds``, read off the ``eps = 0`` profile."""
    prof = profile or UpperBoundProfile.build(y, 0.0, 0.5, 1, check_floor=False)
    r = -np.log(np.asarray(y.y(x), dtype=float))
    out = prof.G_of_r(r)
    return float(out) if np.ndim(out) == 0 else out


def bellman_ode_check(x: float, y: OdeSolution, p: float) -> dict:
    """Evaluate both sides of the continuous Bellman equation at ``x``.

    Returns ``-d'(x)``, the supremum of ``theta + K(p mu) - p mu d(x)`` over
    ``mu``, and the maximizer next to the claimed ``-ln y(x) / p``.
    """
    prof = UpperBoundProfile.build(y, 0.0, p, 1, check_floor=False)
    d = continuation_value(x, y, prof)
    theta = y.theta

    def f(mu):
        return theta + prof.K_scalar(p * mu) - p * mu * d

    mu, val = golden_section_max(f, 0.0, prof.r_max / p, tol=1e-14)
    return {"lhs": -1.0 / y.dy(x), "rhs": val, "mu": mu, "mu_claimed": -math.log(y.y(x)) / p}


def eta_sigma(sigma: float, n: int, y: OdeSolution) -> float:
    """Slack factor of the discrete-to-continuous comparison."""
    ly = math.log(y.y(1.0 - sigma))
    if not n > -ly:
        raise InvalidInstanceError("n must exceed -log y(1 - sigma)")
    return (n * sigma - ly * (1.0 - sigma)) / ((1.0 - sigma) * (n + ly))


def tilde_claim_gap(sigma: float, n: int, p: float, y: OdeSolution, steps=None) -> float:
    """Largest violation of the one-step inequality for ``(1 + eta) d((1 - sigma) i / n)``.

    For each step ``i`` the supremum over ``q`` of
    ``(1-p) int_0^q F + (1 - p q) Dt_{i+1}`` is compared with ``Dt_i``. A
    nonpositive return value means the inequality holds at every checked step.
    """
    prof = UpperBoundProfile.build(y, 0.0, p, n, check_floor=False)
    eta = eta_sigma(sigma, n, y)
    theta = y.theta

    def dt(i):
        x = (1.0 - sigma) * i / n
        return (1.0 + eta) * continuation_value(min(x, y.t_end), y, prof) if x < 1.0 else 0.0

    steps = range(1, n + 1) if steps is None else steps
    worst = -math.inf
    for i in steps:
        nxt = dt(i + 1)

        def f(mu):
            return (theta + prof.K_scalar(p * mu)) / n + (1.0 - p * mu / n) * nxt

        _, val = golden_section_max(f, 0.0, min(float(n), prof.r_max / p), tol=1e-14)
        worst = max(worst, val - dt(i))
    return worst
