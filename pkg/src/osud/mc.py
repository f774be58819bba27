"""Seeded Monte Carlo engine shared by every simulation in the package.

Trials are grouped in fixed blocks of ``BLOCK`` episodes. Block ``b`` of a
run draws from its own generator derived from ``(seed, stream, b)``, so the
numbers do not depend on how blocks are scheduled across worker threads.
Per-trial payoffs are concatenated in block order before reduction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

BLOCK = 4096


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Generator for one block, keyed by ``(seed, stream, block)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def run_blocks(fn: Callable, trials: int, seed: int, *, stream: int = 0, workers: int = 1) -> np.ndarray:
    """Apply ``fn(rng, size)`` to every block and stack the results in order.

    ``fn`` must return an array whose first axis has length ``size``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    nblocks = math.ceil(trials / BLOCK)
    sizes = [BLOCK] * (nblocks - 1) + [trials - BLOCK * (nblocks - 1)]

    def job(b):
        return np.asarray(fn(block_rng(seed, b, stream), sizes[b]))

    if workers <= 1 or nblocks == 1:
        parts = [job(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(nblocks)))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    trials: int

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        mean = float(np.sum(x) / n)
        if n < 2:
            return cls(mean, math.inf, n)
        var = float(np.sum((x - mean) ** 2) / (n - 1))
        return cls(mean, math.sqrt(var / n), n)

    def __iter__(self):
        return iter((self.mean, self.stderr))


@dataclass(frozen=True)
class EstimateResult:
    """Estimates of the sum objective and the max objective from shared episodes."""

    sum: Estimate
    max: Estimate


@dataclass
class Episode:
    """Outcome of a single run of a policy."""

    accepted_values: list = field(default_factory=list)
    disrupted: bool = False
    disrupting_value: float | None = None
    payoff: float = 0.0
    max_payoff: float = 0.0


class Policy:
    """Online decision rule.

    ``decide`` sees only the current step: the values drawn at this step for
    the still-running episodes, their quantiles within the step distribution,
    and the episode indices. It returns a boolean acceptance mask.
    """

    def start(self, size: int, rng: np.random.Generator) -> None:
        """Reset per-episode state for a batch of ``size`` episodes."""

    def decide(self, step, values, quantiles, episodes, rng) -> np.ndarray:
        raise NotImplementedError


class AcceptAll(Policy):
    def decide(self, step, values, quantiles, episodes, rng):
        return np.ones(values.shape, dtype=bool)


class RejectAll(Policy):
    def decide(self, step, values, quantiles, episodes, rng):
        return np.zeros(values.shape, dtype=bool)


class FixedQuantile(Policy):
    """Accept iff the drawn value's quantile is at most ``q``."""

    def __init__(self, q: float):
        self.q = float(q)

    def decide(self, step, values, quantiles, episodes, rng):
        return quantiles <= self.q


class StepThresholds(Policy):
    """Accept iff the value is at least ``thresholds[step]``."""

    def __init__(self, thresholds):
        self.thresholds = np.asarray(thresholds, dtype=float)

    def decide(self, step, values, quantiles, episodes, rng):
        return values >= self.thresholds[step]


def simulate_block(inst, policy: Policy, rng: np.random.Generator, size: int, *,
                   disrupt: bool = True, include_disrupting: bool = False) -> np.ndarray:
    """Run ``size`` episodes in lockstep; returns ``(size, 2)`` payoffs (sum, max)."""
    p, zeta = inst.p, inst.zeta
    payoff = np.zeros(size)
    best = np.zeros(size)
    alive = np.arange(size)
    policy.start(size, rng)
    for i in range(inst.n):
        if alive.size == 0:
            break
        dist = inst.step_dist(i)
        x, u = dist.sample_with_quantile(rng, alive.size)
        acc = np.asarray(policy.decide(i, x, u, alive, rng), dtype=bool)
        if not acc.any():
            continue
        idx = alive[acc]
        xa = x[acc]
        if disrupt:
            hit = rng.random(idx.size) < p
        else:
            hit = np.zeros(idx.size, dtype=bool)
        keep = ~hit
        payoff[idx[keep]] += xa[keep]
        best[idx[keep]] = np.maximum(best[idx[keep]], xa[keep])
        if hit.any():
            payoff[idx[hit]] += zeta * xa[hit]
            if include_disrupting:
                best[idx[hit]] = np.maximum(best[idx[hit]], xa[hit])
            dead = np.zeros(size, dtype=bool)
            dead[idx[hit]] = True
            alive = alive[~dead[alive]]
    return np.column_stack([payoff, best])


def run_episode(inst, policy: Policy, rng: np.random.Generator, *, disrupt: bool = True,
                include_disrupting: bool = False) -> Episode:
    """Run one episode, drawing values one step at a time."""
    ep = Episode()
    policy.start(1, rng)
    one = np.array([0])
    for i in range(inst.n):
        x, u = inst.step_dist(i).sample_with_quantile(rng, 1)
        if not bool(np.asarray(policy.decide(i, x, u, one, rng))[0]):
            continue
        v = float(x[0])
        if disrupt and rng.random() < inst.p:
            ep.disrupted = True
            ep.disrupting_value = v
            ep.payoff += inst.zeta * v
            if include_disrupting:
                ep.max_payoff = max(ep.max_payoff, v)
            break
        ep.accepted_values.append(v)
        ep.payoff += v
        ep.max_payoff = max(ep.max_payoff, v)
    return ep


def estimate(inst, policy: Policy, trials: int, seed: int, *, workers: int = 1, disrupt: bool = True,
             include_disrupting: bool = False, stream: int = 1) -> EstimateResult:
    """Monte Carlo value of ``policy`` under both objectives."""
    if trials < 2:
        raise ValueError("trials must be at least 2")

    def fn(rng, size):
        return simulate_block(inst, policy, rng, size, disrupt=disrupt,
                              include_disrupting=include_disrupting)

    out = run_blocks(fn, trials, seed, stream=stream, workers=workers)
    return EstimateResult(Estimate.from_samples(out[:, 0]), Estimate.from_samples(out[:, 1]))
