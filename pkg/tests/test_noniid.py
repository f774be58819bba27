from __future__ import annotations

import math

import numpy as np
import pytest

from osud import Atom, DomainError, Instance, InvalidScheduleError, QuantileDistribution, point_mass, uniform
from osud.clairvoyant import opt_value
from osud.dp import DiscreteInstance, solve
from osud.fixtures import smooth_distributions
from osud.noniid import (NonIIDInstance, build_schedule, estimate_opt_probs, excess_mean,
                         exact_policy_value, online_optimum, opt_value_mc, policy_value, random_instance,
                         tight_instance, tight_opt_value, tight_z)


def _ratio_z(est, opt):
    ratio = est.mean / opt.mean
    se = ratio * math.hypot(est.stderr / est.mean, opt.stderr / opt.mean)
    return ratio, se


def test_identical_distributions_symmetric_z():
    inst = NonIIDInstance((uniform(),) * 6, 0.3)
    zp = estimate_opt_probs(inst, 100000, 1)
    m = zp.z.mean()
    assert np.all(np.abs(zp.z - m) <= 4 * zp.z_stderr * math.sqrt(2))


def test_point_mass_ladder():
    p = 0.4
    inst = NonIIDInstance(tuple(point_mass(v) for v in (5.0, 4.0, 3.0, 2.0, 1.0)), p)
    zp = estimate_opt_probs(inst, 1000, 2)
    expect = (1 - p) ** np.arange(5)
    assert np.allclose(zp.z, expect, rtol=1e-14)
    prefix = np.cumsum(zp.z)
    i = np.arange(1, 6)
    assert np.all(prefix <= -np.expm1(i * math.log1p(-p)) / p + 1e-12)


def test_tight_instance_z():
    n, eps, p = 30, 0.05, 0.5
    inst = tight_instance(n, eps, p).instance
    zp = estimate_opt_probs(inst, 200000, 3)
    assert np.all(np.abs(zp.z - tight_z(n, eps, p)) <= 4 * np.maximum(zp.z_stderr, 1e-12))
    assert zp.z.sum() <= 1 / p


def test_schedule_closed_forms():
    inst = NonIIDInstance((uniform(),) * 4, 0.5)
    s = build_schedule(inst, np.zeros(4))
    assert np.all(s.eps == 0.5) and np.all(s.R == 1.0)
    s = build_schedule(inst, np.array([0.3, 0.6, 0.2, 0.9]))
    assert s.eps[0] == 0.5 and s.R[0] == 1.0
    assert max(s.residuals(0.5).values()) < 1e-12
    assert s.tau[1] == pytest.approx(0.4)
    s = build_schedule(inst, np.array([1.0, 1.0, 0.0, 0.0]))
    assert s.R[2] == pytest.approx(0.5) and s.eps[2] == pytest.approx(0.0, abs=1e-15)
    assert np.all((s.eps >= 0) & (s.eps <= 1))


def test_schedule_rejects_budget_violation():
    inst = NonIIDInstance((uniform(),) * 4, 0.5)
    with pytest.raises(InvalidScheduleError):
        build_schedule(inst, np.array([1.0, 1.0, 1.0, 0.0]))
    with pytest.raises(InvalidScheduleError):
        build_schedule(inst, np.array([1.2, 0.0, 0.0, 0.0]))
    with pytest.raises(InvalidScheduleError):
        build_schedule(inst, np.zeros(3))


def test_single_step_exact_half():
    d = smooth_distributions()["trunc_exp5"]
    p, z = 0.3, 0.5
    inst = NonIIDInstance((d,), p, z)
    zp = estimate_opt_probs(inst, 1000, 4)
    assert zp.z[0] == 1.0
    s = build_schedule(inst, zp.z)
    B = 1 - (1 - z) * p
    assert exact_policy_value(inst, s) == pytest.approx(0.5 * B * d.mean(), rel=1e-12)
    est = policy_value(inst, s, 200000, 4)
    assert abs(est.mean - 0.5 * B * d.mean()) <= 4 * est.stderr


def test_iid_special_case():
    for name, n, p in [("uniform01", 10, 0.5), ("power2", 20, 0.2), ("top_heavy2", 5, 0.8)]:
        base = Instance(n, smooth_distributions()[name], p, 0.5)
        inst = NonIIDInstance.iid(base)
        opt = opt_value(base, check=False).value
        zp = estimate_opt_probs(inst, 100000, 5)
        assert abs(zp.opt.mean - opt) <= 4 * zp.opt.stderr
        s = build_schedule(inst, zp.z)
        est = policy_value(inst, s, 100000, 5)
        assert est.mean >= opt / 2 - 4 * est.stderr
        assert abs(est.mean - exact_policy_value(inst, s)) <= 4 * est.stderr


def test_random_fixtures_half():
    rng = np.random.default_rng(6)
    for k in range(20):
        inst = random_instance(rng)
        zp = estimate_opt_probs(inst, 20000, 60 + k)
        s = build_schedule(inst, zp.z)
        assert max(s.residuals(inst.p).values()) < 1e-9
        est = policy_value(inst, s, 20000, 60 + k)
        ratio, se = _ratio_z(est, zp.opt)
        assert ratio >= 0.5 - 4 * se
        assert online_optimum(inst)[0] >= exact_policy_value(inst, s) - 1e-12


def test_rao_blackwell_matches_plain_benchmark():
    inst = random_instance(np.random.default_rng(7), max_n=10)
    a = estimate_opt_probs(inst, 100000, 8).opt
    b = opt_value_mc(inst, 100000, 9)
    assert abs(a.mean - b.mean) <= 4 * math.hypot(a.stderr, b.stderr)
    assert a.stderr <= b.stderr


def test_online_optimum_matches_dp():
    inst = DiscreteInstance(6, np.array([0.0, 1.0, 2.5, 4.0]), np.array([0.4, 0.3, 0.2, 0.1]), 0.35, 0.5)
    ni = NonIIDInstance((inst.to_dist(),) * inst.n, inst.p, inst.zeta)
    assert online_optimum(ni) == pytest.approx(solve(inst).values, rel=1e-12, abs=1e-14)


def test_excess_mean():
    u = uniform()
    assert excess_mean(u, 0.5) == pytest.approx(0.125, abs=1e-12)
    assert excess_mean(u, -1.0) == pytest.approx(1.5)
    assert excess_mean(u, 2.0) == 0.0
    d = QuantileDistribution([Atom(0.25, 3.0), Atom(0.75, 1.0)])
    assert excess_mean(d, 2.0) == pytest.approx(0.25, abs=1e-12)


def test_tight_backward_induction():
    n, eps, p = 40, 0.05, 0.5
    t = tight_instance(n, eps, p)
    V = online_optimum(t.instance)
    B = t.instance.recovery_factor
    assert V[0] == pytest.approx(B, rel=1e-12)
    # every deterministic step: skipping (V_{i+1}) beats accepting
    for i in range(n - 1):
        x = p - eps
        assert V[i + 1] >= B * x + (1 - p) * V[i + 1]


def test_tight_opt_formula():
    n, eps, p = 30, 0.05, 0.5
    t = tight_instance(n, eps, p)
    est = opt_value_mc(t.instance, 400000, 10)
    assert abs(est.mean - t.opt_value) <= 4 * est.stderr
    assert t.alg_value == pytest.approx(0.5)


def test_tight_ratio_large_n():
    t = tight_instance(10 ** 4, 1e-4, 0.5)
    assert abs(t.ratio - 0.5) <= 0.01
    assert tight_opt_value(10 ** 4, 1e-4, 0.5) == pytest.approx(t.opt_value)
    with pytest.raises(DomainError):
        tight_instance(10, 0.6, 0.5)


def test_json_round_trip():
    inst = random_instance(np.random.default_rng(11))
    back = NonIIDInstance.from_json(inst.to_json())
    assert back.n == inst.n and back.p == inst.p
    qs = np.linspace(0.01, 1, 20)
    for a, b in zip(inst.distributions, back.distributions):
        assert np.allclose(a.inverse_cdf(qs), b.inverse_cdf(qs))


def test_policy_worker_invariance():
    inst = random_instance(np.random.default_rng(12))
    s = build_schedule(inst, estimate_opt_probs(inst, 5000, 13).z)
    assert policy_value(inst, s, 20000, 14, workers=1) == policy_value(inst, s, 20000, 14, workers=8)
