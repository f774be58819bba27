"""Independent, non-identical values: the half-competitive skipping policy.

The benchmark sees every value, sorts them in decreasing order and selects
through the geometric disruption budget, so the value ranked ``r`` (from 0)
is attempted with probability ``(1 - p)^r``. Let ``z_i`` be the probability
that step ``i`` is attempted. The online policy skips step ``i`` with
probability ``eps_i`` and otherwise accepts iff ``X_i`` lies in its top
``z_i`` mass. With

    R_i = 1 - (p/2) sum_{k<i} z_k,    eps_i = 1 - 1 / (2 R_i),

it reaches step ``i`` and does not skip with probability exactly ``1/2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dist import Atom, Continuous, Instance, QuantileDistribution, point_mass
from .errors import DomainError, InvalidInstanceError, InvalidScheduleError
from .mc import Estimate, EstimateResult, Policy, block_rng, estimate, BLOCK

Z_STREAM = 3
BUDGET_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class NonIIDInstance:
    """Per-step distributions with a common disruption probability."""

    distributions: tuple
    p: float
    zeta: float = 0.0

    def __post_init__(self):
        ds = tuple(self.distributions)
        if not ds:
            raise InvalidInstanceError("need at least one distribution")
        if not all(isinstance(d, QuantileDistribution) for d in ds):
            raise InvalidInstanceError("every step needs a QuantileDistribution")
        if not 0 < self.p < 1 or not 0 <= self.zeta <= 1:
            raise InvalidInstanceError("need p in (0, 1) and zeta in [0, 1]")
        object.__setattr__(self, "distributions", ds)

    @property
    def n(self) -> int:
        return len(self.distributions)

    def step_dist(self, i: int) -> QuantileDistribution:
        return self.distributions[i]

    @property
    def recovery_factor(self) -> float:
        return 1.0 - (1.0 - self.zeta) * self.p

    @classmethod
    def iid(cls, inst: Instance) -> "NonIIDInstance":
        return cls((inst.dist,) * inst.n, inst.p, inst.zeta)

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "zeta": self.zeta,
                "distributions": [d.to_dict() for d in self.distributions]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "NonIIDInstance":
        ds = tuple(QuantileDistribution.from_dict(d) for d in data["distributions"])
        if "n" in data and int(data["n"]) != len(ds):
            raise InvalidInstanceError("n does not match the number of distributions")
        return cls(ds, float(data["p"]), float(data.get("zeta", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "NonIIDInstance":
        return cls.from_dict(json.loads(text))


# -- benchmark ---------------------------------------------------------------


@dataclass(frozen=True)
class OptProbabilities:
    """Estimated selection probabilities and benchmark value."""

    z: np.ndarray
    z_stderr: np.ndarray
    opt: Estimate


def _draw_all(inst: NonIIDInstance, rng, size):
    x = np.empty((size, inst.n))
    for i, d in enumerate(inst.distributions):
        x[:, i] = d.sample(rng, size)
    return x


def _attempt_weights(x, p, rng):
    """``(1 - p)^rank`` per entry, ranks by decreasing value with random ties."""
    size, n = x.shape
    order = np.lexsort((rng.random(x.shape), -x), axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(n)[None, :].repeat(size, axis=0), axis=1)
    return np.exp(ranks * math.log1p(-p))


def estimate_opt_probs(inst: NonIIDInstance, trials: int, seed: int) -> OptProbabilities:
    """Monte Carlo ``z_i`` and ``v(OPT)``.

    The disruption time is integrated out: each draw of the values
    contributes ``(1 - p)^rank`` to ``z_i`` and ``B sum_r (1 - p)^r x_(r)`` to
    the benchmark. Blocks are reduced to sums in block order.
    """
    if trials < 2:
        raise DomainError("trials must be at least 2")
    n, B = inst.n, inst.recovery_factor
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    nblocks = math.ceil(trials / BLOCK)
    for b in range(nblocks):
        size = min(BLOCK, trials - b * BLOCK)
        rng = block_rng(seed, b, Z_STREAM)
        x = _draw_all(inst, rng, size)
        w = _attempt_weights(x, inst.p, rng)
        row = np.column_stack([w, B * np.sum(w * x, axis=1)])
        s1 += row.sum(axis=0)
        s2 += (row * row).sum(axis=0)
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean * mean, 0.0) * trials / (trials - 1)
    se = np.sqrt(var / trials)
    return OptProbabilities(mean[:n], se[:n], Estimate(float(mean[n]), float(se[n]), trials))


# -- schedule and policy -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SkippingSchedule:
    z: np.ndarray
    tau: np.ndarray
    eps: np.ndarray
    R: np.ndarray

    def residuals(self, p: float) -> dict:
        R, z, e = self.R, self.z, self.eps
        return {"start": abs(R[0] - 1.0),
                "chain": float(np.max(np.abs(R[1:] - (R[:-1] - z[:-1] * p / 2.0)))) if R.size > 1 else 0.0,
                "half": float(np.max(np.abs(R * (1.0 - e) - 0.5)))}


def build_schedule(inst: NonIIDInstance, z) -> SkippingSchedule:
    """Closed-form reach and skip probabilities for the given ``z``.

    Raises :class:`InvalidScheduleError` when an entry leaves ``[0, 1]`` or a
    prefix sum exceeds ``1 / p``.
    """
    z = np.asarray(z, dtype=float)
    p = inst.p
    if z.shape != (inst.n,):
        raise InvalidScheduleError("z needs one entry per step")
    if np.any(~np.isfinite(z)) or np.any(z < 0) or np.any(z > 1):
        raise InvalidScheduleError("z entries must lie in [0, 1]")
    prefix = np.concatenate([[0.0], np.cumsum(z[:-1])])
    if np.any(prefix > (1.0 + BUDGET_RTOL) / p):
        raise InvalidScheduleError("prefix sums of z exceed 1/p")
    R = 1.0 - 0.5 * p * prefix
    eps = 1.0 - 1.0 / (2.0 * R)
    # a prefix sum within rounding of 1/p gives eps of order -1e-16
    eps = np.where((eps < 0) & (eps > -1e-10), 0.0, eps)
    tau = np.array([float(d.inverse_cdf(zi)) if zi > 0 else math.inf
                    for d, zi in zip(inst.distributions, z)])
    return SkippingSchedule(z, tau, eps, R)


class SkippingPolicy(Policy):
    """Skip with probability ``eps_i``, else accept iff the value is in the top ``z_i`` mass."""

    def __init__(self, schedule: SkippingSchedule):
        self.schedule = schedule

    def decide(self, step, values, quantiles, episodes, rng):
        go = rng.random(values.shape) >= self.schedule.eps[step]
        return go & (quantiles <= self.schedule.z[step])


def exact_policy_value(inst: NonIIDInstance, s: SkippingSchedule) -> float:
    """``sum_i R_i (1 - eps_i) B int_0^{z_i} Q_i``."""
    pe = np.array([d.partial_expectation(zi) for d, zi in zip(inst.distributions, s.z)])
    return float(inst.recovery_factor * np.sum(s.R * (1.0 - s.eps) * pe))


def policy_value(inst: NonIIDInstance, s: SkippingSchedule, trials: int, seed: int, *,
                 workers: int = 1) -> Estimate:
    """Simulated value of the skipping policy under the sum objective."""
    res: EstimateResult = estimate(inst, SkippingPolicy(s), trials, seed, workers=workers)
    return res.sum


def opt_value_mc(inst: NonIIDInstance, trials: int, seed: int) -> Estimate:
    """Benchmark with an explicit geometric disruption time (no integration)."""
    n, p, zeta = inst.n, inst.p, inst.zeta
    vals = []
    for b in range(math.ceil(trials / BLOCK)):
        size = min(BLOCK, trials - b * BLOCK)
        rng = block_rng(seed, b, Z_STREAM + 1)
        x = -np.sort(-_draw_all(inst, rng, size), axis=1)
        prefix = np.concatenate([np.zeros((size, 1)), np.cumsum(x, axis=1)], axis=1)
        d = rng.geometric(p, size)
        m = np.minimum(d - 1, n)
        rows = np.arange(size)
        pay = prefix[rows, m]
        hit = d <= n
        pay[hit] += zeta * x[rows[hit], d[hit] - 1]
        vals.append(pay)
    return Estimate.from_samples(np.concatenate(vals))


# -- optimal online policy -------------------------------------------------------


def excess_mean(dist: QuantileDistribution, t: float) -> float:
    """``E[(X - t)^+]`` by bisection for the mass above ``t``."""
    if t <= 0:
        return dist.mean() - t
    lo, hi = 0.0, 1.0
    if float(dist.inverse_cdf(1.0)) > t:
        return dist.mean() - t
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(dist.inverse_cdf(mid)) > t:
            lo = mid
        else:
            hi = mid
    q = lo
    return max(float(dist.partial_expectation(q)) - t * q, 0.0)


def online_optimum(inst: NonIIDInstance) -> np.ndarray:
    """Backward induction ``V_i = V_{i+1} + E[(B X_i - p V_{i+1})^+]``; returns ``V_1..V_{n+1}``."""
    B, p = inst.recovery_factor, inst.p
    V = np.zeros(inst.n + 1)
    for i in range(inst.n - 1, -1, -1):
        cont = V[i + 1]
        V[i] = cont + B * excess_mean(inst.distributions[i], p * cont / B)
    return V


# -- tight instance -----------------------------------------------------------


@dataclass(frozen=True)
class TightInstance:
    instance: NonIIDInstance
    alg_value: float
    opt_value: float

    @property
    def ratio(self) -> float:
        return self.alg_value / self.opt_value


def tight_opt_value(n: int, eps: float, p: float, zeta: float = 0.0) -> float:
    """``B [1 + ((p - eps)(1 - eps p) / p)(1 - (1 - p)^{n-1})]``."""
    B = 1.0 - (1.0 - zeta) * p
    return B * (1.0 + (p - eps) * (1.0 - eps * p) / p * -math.expm1((n - 1) * math.log1p(-p)))


def tight_z(n: int, eps: float, p: float) -> np.ndarray:
    """Selection probabilities on the tight instance (ties split evenly)."""
    tail = -math.expm1((n - 1) * math.log1p(-p))
    z = np.full(n, (1.0 - eps * p) * tail / (p * (n - 1)) if n > 1 else 0.0)
    z[-1] = eps + (1.0 - eps) * (1.0 - p) ** (n - 1)
    return z


def tight_instance(n: int, eps: float, p: float, zeta: float = 0.0) -> TightInstance:
    """``n - 1`` copies of ``p - eps``, then ``1/eps`` with probability ``eps``.

    The online optimum skips every deterministic step and takes the last,
    earning ``B``.
    """
    if not 0 < eps < p:
        raise DomainError("eps must lie in (0, p)")
    if n < 1:
        raise DomainError("n must be positive")
    last = QuantileDistribution([Atom(eps, 1.0 / eps), Atom(1.0 - eps, 0.0)])
    ds = (point_mass(p - eps),) * (n - 1) + (last,)
    inst = NonIIDInstance(ds, p, zeta)
    return TightInstance(inst, inst.recovery_factor, tight_opt_value(n, eps, p, zeta))


# -- random fixtures ----------------------------------------------------------


def random_step_dist(rng: np.random.Generator, scale: float = 1.0) -> QuantileDistribution:
    """Mixture of one to three atoms or uniforms on disjoint value ranges."""
    k = int(rng.integers(1, 4))
    edges = np.sort(rng.uniform(0.0, scale, 2 * k))[::-1]
    mass = rng.dirichlet(np.ones(k))
    pieces, pos = [], 0.0
    for j in range(k):
        hi, lo = edges[2 * j], edges[2 * j + 1]
        end = 1.0 if j == k - 1 else pos + mass[j]
        if rng.random() < 0.5:
            pieces.append(Atom(end - pos, float(hi)))
        else:
            pieces.append(Continuous.from_table([pos, end], [hi, lo]))
        pos = end
    return QuantileDistribution(pieces)


def random_instance(rng: np.random.Generator, max_n: int = 20) -> NonIIDInstance:
    n = int(rng.integers(1, max_n + 1))
    scales = rng.uniform(0.2, 5.0, n)
    ds = tuple(random_step_dist(rng, s) for s in scales)
    return NonIIDInstance(ds, float(rng.uniform(0.05, 0.95)), float(rng.choice([0.0, 0.5, 1.0])))
