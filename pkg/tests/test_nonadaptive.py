from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osud import DomainError, Instance, InvalidInstanceError, point_mass, uniform
from osud.clairvoyant import opt_value
from osud.fixtures import smooth_distributions
from osud.mc import FixedQuantile, estimate
from osud.nonadaptive import (a_n, alg_value, critical_gap, critical_lambda, eta_at_optimum, eta_bound,
                              hard_instance_exact, hard_instance_opt, hard_instance_report,
                              lemma_mono_ratio, optimal_quantile, rare_disruption_bound, report)

E1 = 1 - math.exp(-1)


def test_optimal_quantile_examples():
    assert optimal_quantile(4, 0.5) == 0.5
    assert optimal_quantile(1, 0.9) == 1.0
    assert optimal_quantile(10, 0.5) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        optimal_quantile(0, 0.5)


def test_alg_value_examples():
    u = uniform()
    assert alg_value(Instance(1, u, 0.5), 1.0) == pytest.approx(0.25)
    assert alg_value(Instance(2, u, 0.5), 1.0) == pytest.approx(0.375)
    assert alg_value(Instance(1, u, 0.5, 1.0), 1.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        alg_value(Instance(2, u, 0.5), 0.0)


def test_accept_all_equals_enumeration():
    # accept-all collects X_1 then X_2 ... while no disruption has occurred
    for n, p, z in [(2, 0.5, 0.0), (3, 0.3, 0.5), (5, 0.8, 1.0)]:
        mean = 0.5
        k = np.arange(n)
        direct = mean * float(np.sum((1 - p) ** k * (1 - p + p * z)))
        assert alg_value(Instance(n, uniform(), p, z), 1.0) == pytest.approx(direct, rel=1e-13)


def test_a_n_is_expected_retained_count():
    # E[min(Bin(n, q), D - 1)] by enumeration over both variables
    from scipy import stats
    n, p, q = 6, 0.35, 0.4
    k = np.arange(n + 1)
    d = np.arange(1, 400)
    pk = stats.binom.pmf(k, n, q)
    pd = p * (1 - p) ** (d - 1)
    direct = float(pk @ np.minimum(k[:, None], d[None, :] - 1) @ pd)
    assert a_n(q, p, n) == pytest.approx(direct, rel=1e-12)


def test_eta_bound_examples():
    assert eta_bound(1, 0.5, 1.0) == pytest.approx(1.0)
    assert eta_bound(2, 0.5, 1.0) == pytest.approx(0.75)
    assert eta_at_optimum(10 ** 6, 0.5) == pytest.approx(E1, abs=1e-5)


def test_rare_disruption_bound():
    assert rare_disruption_bound(1.0) == pytest.approx(E1, abs=1e-15)
    assert rare_disruption_bound(1e-9) == pytest.approx(1.0, abs=1e-8)
    assert rare_disruption_bound(0.5) == pytest.approx(0.78694, abs=1e-5)
    with pytest.raises(DomainError):
        rare_disruption_bound(0.0)


def test_guarantee_chain_on_fixtures():
    for d in smooth_distributions().values():
        for n in (1, 2, 5, 10, 100, 1000):
            for p in (0.1, 0.5, 0.9):
                for z in (0.0, 0.5, 1.0):
                    r = report(Instance(n, d, p, z))
                    assert r.ratio >= r.eta_bound - 1e-9
                    assert r.eta_bound >= E1 - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.floats(0.01, 0.99))
def test_eta_at_optimum_above_limit(n, p):
    assert eta_at_optimum(n, p) >= E1 - 1e-12


@pytest.mark.parametrize("p", [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
def test_eta_monotone_in_n(p):
    eta = np.array([eta_at_optimum(n, p) for n in range(1, 10 ** 4 + 1)])
    assert np.all(np.diff(eta) <= 1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 20, 50])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_lemma_mono(n, p):
    v = np.linspace(1e-3, 0.999, 300)
    r = lemma_mono_ratio(v, n, p)
    assert np.all(np.diff(r) >= -1e-12 * r[1:])


def test_eta_independent_of_zeta():
    d = smooth_distributions()["trunc_exp5"]
    for z in (0.0, 0.5, 1.0):
        r = report(Instance(20, d, 0.3, z))
        assert r.eta_bound == eta_bound(20, 0.3, optimal_quantile(20, 0.3))
        assert r.ratio >= r.eta_bound


def test_critical_point_theorem_instance():
    for p in (0.2, 0.5, 0.8):
        lam = critical_lambda(1.0, p * (math.e - 2), p, 200.0)
        assert lam == pytest.approx(1.0 / p, rel=1e-10)
        assert abs(critical_gap(lam, 1.0, p * (math.e - 2), p)) < 1e-14


def test_spike_only_ratio_one():
    r = hard_instance_report(1.0, 0.0, 5.0, 0.5, 100)
    assert r.ratio == pytest.approx(1.0, abs=1e-12)


def test_theorem_instance_ratio():
    p = 0.5
    r = hard_instance_report(1.0, p * (math.e - 2), 200.0, p, 10 ** 5)
    assert r.ratio <= E1 + 0.01
    assert r.ratio == pytest.approx(E1, abs=1e-9)


def test_hard_instance_opt_series():
    # with a2 = 0 only the spike matters
    assert hard_instance_opt(1.0, 0.0, 3.0, 0.4) == pytest.approx(0.6)
    # a2 block: sum_j P[Pois >= j](1-p)^j = 1 - exp(-beta p) ... times (1-p)/p
    beta, p = 4.0, 0.3
    closed = (1 - p) / p * -math.expm1(-beta * p)
    assert hard_instance_opt(0.0, 1.0, beta, p) == pytest.approx(closed, rel=1e-11)


def test_hard_instance_finite_n_approaches_limit():
    p = 0.5
    a2 = p * (math.e - 2)
    exact = hard_instance_exact(1.0, a2, 200.0, p, 10 ** 5).ratio
    assert abs(exact - E1) < 1e-3
    assert exact <= E1 + 0.01


def test_hard_instance_rejects_beta_above_n():
    with pytest.raises(InvalidInstanceError):
        hard_instance_report(1.0, 1.0, 20.0, 0.5, 10)


@pytest.mark.parametrize("name,n,p,z", [("uniform01", 10, 0.5, 0.0), ("trunc_exp5", 30, 0.2, 0.5),
                                        ("power2", 5, 0.9, 1.0)])
def test_simulation_matches_closed_form(name, n, p, z):
    inst = Instance(n, smooth_distributions()[name], p, z)
    q = optimal_quantile(n, p)
    est = estimate(inst, FixedQuantile(q), 200000, 21).sum
    assert abs(est.mean - alg_value(inst, q)) <= 4 * est.stderr


def test_simulation_on_atoms():
    # quantile thresholds inside an atom use randomized tie-breaking
    from osud import Atom, QuantileDistribution
    d = QuantileDistribution([Atom(0.3, 2.0), Atom(0.7, 1.0)])
    inst = Instance(4, d, 0.4, 0.5)
    q = 0.5
    est = estimate(inst, FixedQuantile(q), 200000, 22).sum
    assert abs(est.mean - alg_value(inst, q)) <= 4 * est.stderr


def test_point_mass_ratio():
    inst = Instance(50, point_mass(1.0), 0.5)
    r = report(inst, q=1.0)
    assert r.ratio == pytest.approx(1.0, abs=1e-12)
    assert r.opt_value == pytest.approx(opt_value(inst).value)
