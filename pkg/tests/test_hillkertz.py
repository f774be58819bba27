from __future__ import annotations

import math

import numpy as np
import pytest

from osud import DomainError
from osud.hillkertz import (default_solution, hk_integral, lambda_p, lambda_residual, max_variant_ratio,
                            solve_y, theta_residual, theta_star)


def test_theta_star_value():
    assert abs(theta_star() - 0.745) < 1e-3


def test_theta_star_residual():
    t = theta_star(1e-10)
    assert abs(hk_integral(1.0 / t) - 1.0) < 1e-10
    assert abs(theta_residual(t)) < 1e-10


def test_theta_star_tol_floor():
    with pytest.raises(DomainError):
        theta_star(1e-13)


def test_integral_decreasing_in_beta():
    # bisection brackets on beta: the integral falls through 1 between the probes
    assert hk_integral(1.2) > 1.0 > hk_integral(1.5)
    assert hk_integral(1.5) > hk_integral(2.0)


def test_two_quadrature_schemes_agree():
    assert abs(theta_star(method="simpson") - theta_star(method="gauss")) < 1e-8


def test_ode_initial_and_terminal():
    sol = default_solution()
    assert sol.y(0.0) == pytest.approx(1.0, abs=1e-15)
    assert sol.y(1.0 - 1e-4) < 1e-3
    assert sol.hit_zero


def test_ode_shape():
    sol = default_solution()
    assert np.all(np.diff(sol.grid) > 0)
    assert np.all(np.diff(sol.y_values) < 0)
    inner = sol.grid[(sol.grid > 0) & (sol.grid < sol.t_end)]
    assert np.all(sol.dy(inner) < 0)


def test_second_derivative_identity():
    sol = default_solution()
    t = np.linspace(0.01, 0.99, 200)
    fd = (sol.dy(t + 1e-6) - sol.dy(t - 1e-6)) / 2e-6
    ident = sol.dy(t) * np.log(sol.y(t))
    assert np.allclose(sol.d2y(t), ident, rtol=1e-9, atol=1e-12)
    assert np.allclose(fd, ident, rtol=1e-5, atol=1e-7)


def test_shooting_diagnostic():
    t = theta_star()
    above = solve_y(t + 0.01, grid_size=2048)
    below = solve_y(t - 0.01, grid_size=2048)
    assert not above.hit_zero and above.y(1.0) > 1e-3
    assert below.hit_zero and below.t_end < 0.99


def test_y_inverse():
    sol = default_solution()
    assert sol.y_inverse(1.0) == pytest.approx(0.0, abs=1e-12)
    assert sol.y_inverse(float(sol.y(0.5))) == pytest.approx(0.5, abs=1e-12)
    ts = np.linspace(0.0, 0.999, 100)
    for t in ts:
        v = float(sol.y(t))
        assert abs(float(sol.y(sol.y_inverse(v))) - v) < 1e-9
    with pytest.raises(DomainError):
        sol.y_inverse(1.5)


def test_ode_csv(tmp_path):
    sol = solve_y(grid_size=64)
    path = tmp_path / "y.csv"
    sol.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y,dy"
    assert len(lines) == 65


def test_lambda_p_examples():
    assert lambda_p(1.0) == 1.0
    assert max_variant_ratio(1.0) == pytest.approx(1 - math.exp(-1))
    lam = lambda_p(0.5)
    assert abs(lam - 1.32) < 5e-3
    assert abs(lambda_residual(0.5, lam)) < 1e-10
    assert max_variant_ratio(1e-4) > 0.99


def test_lambda_curve():
    ps = np.linspace(0.01, 0.99, 99)
    r = np.array([max_variant_ratio(p) for p in ps])
    assert max(abs(lambda_residual(p)) for p in ps) < 1e-10
    assert np.all(r >= 1 - math.exp(-1) - 1e-12) and np.all(r <= 1)
    assert np.all(np.diff(r) <= 0)


def test_lambda_domain():
    with pytest.raises(DomainError):
        lambda_p(0.0)
