from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from osud import Atom, DomainError, Instance, InvalidInstanceError, QuantileDistribution, point_mass, uniform
from osud.fixtures import smooth_distributions
from osud.hillkertz import lambda_p, max_variant_ratio
from osud.maxvariant import (alg_value_max, alg_value_max_w, bound_terms, cr_lower_bound_max,
                             equalizing_weights, f_curve, hard_instance_max, is_quasiconcave,
                             opt_value_max, r2_curve, r_func, ratio_curve, report)
from osud.mc import FixedQuantile, estimate

E1 = 1 - math.exp(-1)


def test_opt_value_examples():
    assert opt_value_max(Instance(2, uniform(), 0.5)) == pytest.approx(1 / 3, abs=1e-14)
    d = smooth_distributions()["trunc_exp5"]
    assert opt_value_max(Instance(1, d, 0.3)) == pytest.approx(0.7 * d.mean(), rel=1e-12)
    assert opt_value_max(Instance(9, point_mass(2.5), 0.4)) == pytest.approx(0.6 * 2.5)


def _enumerate_uniform_n2(p):
    # first acceptance disrupted: 0; else second disrupted: X1; else max(X1, X2)
    return (1 - p) * (p * 0.5 + (1 - p) * (2 / 3))


def test_alg_value_examples():
    d = smooth_distributions()["cosine"]
    assert alg_value_max(Instance(1, d, 0.3), 1.0) == pytest.approx(0.7 * d.mean(), rel=1e-12)
    for p in (0.2, 0.5, 0.8):
        assert alg_value_max(Instance(2, uniform(), p), 1.0) == pytest.approx(_enumerate_uniform_n2(p),
                                                                               abs=1e-13)
    with pytest.raises(DomainError):
        alg_value_max(Instance(2, uniform(), 0.5), 0.0)


def test_two_forms_agree():
    for d in smooth_distributions().values():
        for n in (1, 2, 10, 100):
            for p in (0.1, 0.5, 0.9):
                for q in (0.05, 0.3, 1.0):
                    inst = Instance(n, d, p)
                    a = alg_value_max(inst, q)
                    b = alg_value_max_w(inst, q)
                    assert a == pytest.approx(b, rel=1e-8, abs=1e-12)


def test_forms_agree_with_atoms():
    d = QuantileDistribution([Atom(0.1, 5.0), Atom(0.3, 2.0), Atom(0.6, 0.5)])
    for q in (0.05, 0.1, 0.25, 0.7):
        inst = Instance(12, d, 0.3)
        assert alg_value_max(inst, q) == pytest.approx(alg_value_max_w(inst, q), rel=1e-10)


@pytest.mark.parametrize("include", [False, True])
@pytest.mark.parametrize("name,n,p,q", [("uniform01", 5, 0.5, 0.4), ("trunc_exp5", 20, 0.3, 0.1)])
def test_simulation_matches(name, n, p, q, include):
    inst = Instance(n, smooth_distributions()[name], p)
    est = estimate(inst, FixedQuantile(q), 300000, 41, include_disrupting=include).max
    assert abs(est.mean - alg_value_max(inst, q, include_disrupting=include)) <= 4 * est.stderr


def test_include_disrupting_benchmark():
    inst = Instance(2, uniform(), 0.5)
    assert opt_value_max(inst, include_disrupting=True) == pytest.approx(2 / 3)
    assert alg_value_max(inst, 1.0, include_disrupting=True) >= alg_value_max(inst, 1.0)


def test_cr_bound_examples():
    lam, b = cr_lower_bound_max(10 ** 4, 0.5)
    assert abs(b - max_variant_ratio(0.5)) < 1e-3
    assert abs(lam - lambda_p(0.5)) < 1e-2
    _, b1 = cr_lower_bound_max(10 ** 6, 1.0)
    assert b1 == pytest.approx(E1, abs=1e-5)
    a, c = bound_terms(10 ** 4, 0.5, lam / 10 ** 4)
    assert a == pytest.approx(c, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 10, 100, 1000])
@pytest.mark.parametrize("p", [0.05, 0.5, 0.95])
def test_cr_bound_floor(n, p):
    _, b = cr_lower_bound_max(n, p)
    assert b >= E1 - 1e-12


def test_r_func_monotone():
    for n in range(1, 51):
        for p in (0.1, 0.5, 0.9):
            for q in (0.1, 0.5, 1.0):
                v = np.linspace(q / 500, q, 500)
                r = r_func(v, n, p, q)
                assert np.all(np.diff(r) >= -1e-12)


def test_guarantee_by_simulation():
    for name in ("uniform01", "trunc_exp20", "top_heavy2", "log_spread"):
        inst = Instance(50, smooth_distributions()[name], 0.4)
        rep = report(inst)
        est = estimate(inst, FixedQuantile(rep.q), 200000, 42).max
        ratio = est.mean / rep.opt_value
        assert ratio >= rep.lower_bound - 4 * est.stderr / rep.opt_value
        assert rep.ratio >= rep.lower_bound - 1e-9


def test_bound_range():
    curve = ratio_curve(np.linspace(0.001, 1.0, 200))
    assert np.all(curve[:, 2] >= E1 - 1e-12) and np.all(curve[:, 2] <= 1.0)
    assert curve[0, 2] > 0.99


def test_equalizing_weights_reach_minimax():
    for p in (0.1, 0.5, 0.9):
        a1, a2 = equalizing_weights(p)
        assert a1 + a2 == pytest.approx(1.0)
        target = max_variant_ratio(p)
        assert hard_instance_max(a1, a2, 60.0, p) == pytest.approx(target, abs=1e-9)
        # sup_t min{1 - e^-t, (1 - e^-pt)/(pt)} sits where the branches cross
        t = brentq(lambda t: -math.expm1(-t) + math.expm1(-p * t) / (p * t), 1e-6, 50, xtol=1e-15)
        assert -math.expm1(-t) == pytest.approx(target, abs=1e-12)


def test_spike_only_ratio_one():
    assert hard_instance_max(1.0, 0.0, 5.0, 0.5) == pytest.approx(1.0, abs=1e-8)


def test_hard_instance_errors():
    with pytest.raises(InvalidInstanceError):
        hard_instance_max(1.0, 1.0, 20.0, 0.5, n=10)
    with pytest.raises(InvalidInstanceError):
        hard_instance_max(0.0, 0.0, 2.0, 0.5)


@pytest.mark.parametrize("a1,a2,p", [(0.3, 0.7, 0.5), (0.6, 0.4, 0.1), (0.9, 0.1, 0.9), (0.1, 2.0, 0.3)])
def test_quasiconcave(a1, a2, p):
    t = np.linspace(1e-3, 30, 1024)
    assert is_quasiconcave(f_curve(t, a1, a2, p), tol=1e-15)


def test_quasiconcave_detector():
    assert is_quasiconcave([0, 1, 2, 1, 0])
    assert not is_quasiconcave([1, 0, 1])


def test_r2_branch_decreasing():
    p, beta = 0.5, 3.0
    t = np.linspace(max(beta, 2 / p), 40, 400)
    assert np.all(np.diff(r2_curve(t, 0.5, 0.5, p, beta)) <= 1e-15)
    # it meets the first branch at t = beta
    assert float(r2_curve(beta, 0.5, 0.5, p, beta)) == pytest.approx(
        (1 - p) * float(f_curve(beta, 0.5, 0.5, p)), rel=1e-12)
