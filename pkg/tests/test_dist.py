from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osud import (Atom, Continuous, DomainError, Instance, InvalidInstanceError, QuantileDistribution,
                  hard_instance_dist, point_mass, uniform)
from osud.dist import from_table, upper_bound_dist
from osud.fixtures import smooth_distributions
from osud.hillkertz import default_solution


def test_uniform_inverse_cdf():
    d = uniform()
    assert d.inverse_cdf(0.25) == pytest.approx(0.75, abs=1e-15)
    assert d.inverse_cdf(1.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("q", [0.0, -0.1, 1.5, math.nan])
def test_inverse_cdf_domain(q):
    with pytest.raises(DomainError):
        uniform().inverse_cdf(q)


def test_hard_instance_second_piece():
    n = 10
    d = hard_instance_dist(1.0, 0.1, 2.0, n)
    spike = d.pieces[0]
    assert isinstance(spike, Atom)
    assert d.inverse_cdf(spike.mass * (1 + 1e-9)) == pytest.approx(0.1)


def test_partial_expectation_uniform():
    d = uniform()
    assert d.partial_expectation(1.0) == pytest.approx(0.5, abs=1e-15)
    assert d.partial_expectation(0.0) == 0.0
    assert d.partial_expectation(0.5) == pytest.approx(0.375, abs=1e-15)


def test_partial_expectation_mean_all_fixtures():
    for d in smooth_distributions().values():
        assert d.partial_expectation(1.0) == pytest.approx(d.mean(), rel=1e-12)


def test_point_mass_sampling():
    rng = np.random.default_rng(0)
    assert np.all(point_mass(3.0).sample(rng, 1000) == 3.0)


def test_uniform_sample_mean():
    rng = np.random.default_rng(1)
    x = uniform().sample(rng, 10 ** 6)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - 0.5) <= 3 * se


def test_hard_instance_atom_frequency():
    n, w = 20, 1.0 / 20
    d = hard_instance_dist(1.0, 0.5, 5.0, n, spike_width=w)
    rng = np.random.default_rng(2)
    m = 10 ** 6
    x = d.sample(rng, m)
    top = d.pieces[0].value
    freq = np.mean(x == top)
    assert abs(freq - w) <= 3 * math.sqrt(w * (1 - w) / m)


def test_hard_instance_shapes():
    # spike integral a1/n sits in an atom; with width 1/n its value is a1
    d = hard_instance_dist(1.0, 0.0, 1.0, 4, spike_width=0.25)
    assert d.pieces[0] == Atom(0.25, 1.0)
    assert d.inverse_cdf(0.5) == 0.0
    assert d.partial_expectation(1.0) == pytest.approx(0.25)
    n = 7
    d = hard_instance_dist(0.0, 1.0, n, n)
    assert d.mean() == pytest.approx(1.0)
    assert d.inverse_cdf(0.999) == 1.0


def test_hard_instance_rejects_beta_above_n():
    with pytest.raises(InvalidInstanceError):
        hard_instance_dist(1.0, 1.0, 11.0, 10)
    with pytest.raises(InvalidInstanceError):
        hard_instance_dist(0.0, 0.0, 1.0, 10)


def test_validation_errors():
    with pytest.raises(InvalidInstanceError):
        QuantileDistribution([Atom(0.5, 1.0)])
    with pytest.raises(InvalidInstanceError):
        QuantileDistribution([Atom(0.5, -1.0), Atom(0.5, 0.0)])
    with pytest.raises(InvalidInstanceError):
        QuantileDistribution([Atom(0.5, 0.0), Atom(0.5, 1.0)])
    with pytest.raises(InvalidInstanceError):
        Instance(0, uniform(), 0.5)
    with pytest.raises(InvalidInstanceError):
        Instance(3, uniform(), 1.0)
    with pytest.raises(InvalidInstanceError):
        Instance(3, uniform(), 0.5, 1.5)


def test_json_round_trip():
    d = QuantileDistribution([Atom(0.2, 5.0), Continuous.from_table([0.2, 0.7, 1.0], [3.0, 1.0, 0.0])])
    e = QuantileDistribution.from_json(d.to_json())
    qs = np.linspace(0.01, 1.0, 50)
    assert np.allclose(d.inverse_cdf(qs), e.inverse_cdf(qs))
    assert e.mean() == pytest.approx(d.mean())


def test_upper_bound_dist_shape():
    y = default_solution()
    eps, p, n = 1e-3, 0.5, 1000
    d = upper_bound_dist(eps, p, n, y)
    assert d.is_nonincreasing(1000)
    assert d.inverse_cdf(1.0) == pytest.approx(0.0, abs=1e-12)
    cont = d.pieces[1]
    lim = float(cont.fn(cont.q_lo))
    assert lim > 0
    with pytest.raises(InvalidInstanceError):
        upper_bound_dist(eps, p, 10, y)


def _all_dists():
    out = list(smooth_distributions().values())
    out.append(hard_instance_dist(1.0, 0.5 * (math.e - 2), 20.0, 100))
    out.append(from_table([0.0, 0.3, 1.0], [2.0, 1.0, 0.5]))
    return out


@pytest.mark.parametrize("d", _all_dists())
def test_nonincreasing_grid(d):
    assert d.is_nonincreasing(1000)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(_all_dists()), st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_mean_value_sandwich(d, a, b):
    q1, q2 = min(a, b), max(a, b)
    if q2 - q1 < 1e-9:
        return
    diff = d.partial_expectation(q2) - d.partial_expectation(q1)
    lo = (q2 - q1) * float(d.inverse_cdf(q2))
    hi = (q2 - q1) * float(d.inverse_cdf(q1))
    tol = 1e-10 * max(1.0, abs(hi))
    assert lo - tol <= diff <= hi + tol


@pytest.mark.parametrize("name", ["uniform01", "trunc_exp5", "power2"])
def test_sampling_reproduces_mean(name):
    d = smooth_distributions()[name]
    x = d.sample(np.random.default_rng(7), 10 ** 6)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - d.partial_expectation(1.0)) <= 4 * se


def test_atom_quantile_tie_breaking():
    d = QuantileDistribution([Atom(0.5, 1.0), Atom(0.5, 0.0)])
    x, u = d.sample_with_quantile(np.random.default_rng(3), 10 ** 5)
    top = u <= 0.5
    assert np.all(x[top] == 1.0) and np.all(x[~top] == 0.0)
    # quantiles within the top atom are uniform over its mass interval
    assert abs(np.mean(u[top] <= 0.25) - 0.5) < 0.01
