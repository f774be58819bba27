"""Acceptance suite: twelve numbered criteria with fixed tolerances.

Each criterion returns a :class:`CriterionResult`. Details contain only
deterministic numbers (no timings), so the report text is reproducible and
can be compared across worker counts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import adaptive, clairvoyant, dp, hillkertz, maxvariant, nonadaptive, noniid
from .dist import Instance, uniform
from .fixtures import smooth_distributions
from .mc import AcceptAll, estimate

ONE_MINUS_INV_E = -math.expm1(-1.0)
SEED = 20240611

# runtime budgets in seconds
BUDGETS = {1: 5, 2: 30, 3: 10, 4: 10, 5: 60, 6: 120, 7: 60, 8: 120, 9: 30, 10: 120, 11: 60, 12: 600}
QUICK = (1, 3, 4, 5, 6, 9)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} c{self.number:02d} {self.name}: {self.detail}"


def _g(x: float) -> str:
    return format(float(x), ".12g")


def c01_theta_star(fault: str | None = None, **_) -> tuple[bool, str]:
    hillkertz._theta_star.cache_clear()
    theta = hillkertz.theta_star(1e-10)
    if fault == "theta_star":
        theta += 0.01
    res = abs(hillkertz.theta_residual(theta))
    ok = 0.7440 <= theta <= 0.7460 and res < 1e-8
    return ok, f"theta_star={_g(theta)} residual={res:.3e}"


def c02_nonadaptive_grid(**_) -> tuple[bool, str]:
    worst = math.inf
    where = None
    for name, d in smooth_distributions().items():
        for n in (1, 2, 5, 10, 100, 1000):
            for p in (0.1, 0.5, 0.9):
                for z in (0.0, 0.5, 1.0):
                    r = nonadaptive.report(Instance(n, d, p, z)).ratio
                    if r < worst:
                        worst, where = r, (name, n, p, z)
    ok = worst >= ONE_MINUS_INV_E - 1e-9
    return ok, f"min_ratio={_g(worst)} at {where[0]} n={where[1]} p={where[2]} zeta={where[3]}"


def c03_hard_instance(**_) -> tuple[bool, str]:
    p, beta, n = 0.5, 200.0, 10 ** 5
    a1 = 1.0
    a2 = p * (math.e - 2.0) * a1
    asym = nonadaptive.hard_instance_report(a1, a2, beta, p, n).ratio
    exact = nonadaptive.hard_instance_exact(a1, a2, beta, p, n).ratio
    ok = asym <= ONE_MINUS_INV_E + 0.01 and exact <= ONE_MINUS_INV_E + 0.01
    return ok, f"ratio_limit={_g(asym)} ratio_n={_g(exact)}"


def c04_eta_monotone(**_) -> tuple[bool, str]:
    ns = np.arange(1, 10 ** 4 + 1)
    worst_rise = 0.0
    for p in (0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9):
        eta = np.array([nonadaptive.eta_at_optimum(int(n), p) for n in ns])
        worst_rise = max(worst_rise, float(np.max(np.diff(eta))))
    term = nonadaptive.eta_at_optimum(10 ** 4, 0.5)
    ok = worst_rise <= 1e-12 and abs(term - ONE_MINUS_INV_E) <= 1e-3
    return ok, f"max_increase={worst_rise:.3e} eta(1e4,0.5)={_g(term)}"


def c05_adaptive(**_) -> tuple[bool, str]:
    worst_res = 0.0
    gs = []
    for p in (0.1, 0.5, 0.9):
        s = adaptive.solve_schedule(1000, p)
        worst_res = max(worst_res, *s.residuals().values(), s.recursion_residual())
        gs.append(adaptive.guarantee(1000, p, s))
    s2 = adaptive.solve_schedule(2, 0.5)
    e1 = 2.0 * (2.0 - math.sqrt(3.0))
    err2 = max(abs(s2.breakpoints[1] - e1), abs(s2.theta_n - 1.0 / e1))
    ok = worst_res < 1e-10 and all(0.735 <= g <= 0.755 for g in gs) and err2 < 1e-9
    return ok, (f"residual={worst_res:.3e} guarantee={','.join(_g(g) for g in gs)} "
                f"n2_error={err2:.3e}")


def c06_upper_bound(**_) -> tuple[bool, str]:
    y = hillkertz.default_solution()
    eps, p, n = 1e-3, 0.5, 10 ** 4
    d1 = dp.bellman_upper_bound(eps, p, n, y)
    opt = dp.opt_value_eps(eps, p, n, y)
    r = d1 / opt
    return r <= 0.765, f"D1={_g(d1)} opt={_g(opt)} ratio={_g(r)}"


def c07_dp(**_) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    mono = True
    for _ in range(200):
        inst = dp.random_instance(rng)
        sol = dp.solve(inst)
        mono &= bool(np.all(np.diff(sol.thresholds) <= 0))
        bf = dp.brute_force_policy_value(inst, sol.thresholds)
        worst = max(worst, abs(bf - sol.d1) / max(1.0, abs(sol.d1)))
    return mono and worst <= 1e-12, f"monotone={mono} max_gap={worst:.3e}"


def c08_benchmark(workers: int = 1, **_) -> tuple[bool, str]:
    worst_gap = 0.0
    for d in smooth_distributions().values():
        for n in (1, 2, 10, 100, 1000):
            for p in (0.1, 0.5, 0.9):
                for z in (0.0, 0.5, 1.0):
                    worst_gap = max(worst_gap, clairvoyant.opt_value(Instance(n, d, p, z)).relative_gap)
    worst_z = 0.0
    for k, d in enumerate(smooth_distributions().values()):
        for n in (2, 10):
            inst = Instance(n, d, 0.5, 0.5)
            exact = clairvoyant.opt_value(inst, check=False).value
            est = clairvoyant.opt_value_mc(inst, 10 ** 6, SEED + 10 * k + n, workers=workers)
            worst_z = max(worst_z, abs(est.mean - exact) / est.stderr)
    ok = worst_gap <= 1e-8 and worst_z <= 4.0
    return ok, f"max_relative_gap={worst_gap:.3e} max_mc_z={worst_z:.4f}"


def c09_max_variant(**_) -> tuple[bool, str]:
    ps = np.linspace(0.01, 0.99, 99)
    res = max(abs(hillkertz.lambda_residual(float(p))) for p in ps)
    curve = maxvariant.ratio_curve(ps)[:, 2]
    in_range = bool(np.all(curve >= ONE_MINUS_INV_E - 1e-12) and np.all(curve <= 1.0))
    mono = bool(np.all(np.diff(curve) <= 1e-15))
    _, bound = maxvariant.cr_lower_bound_max(10 ** 4, 0.5)
    gap = abs(bound - hillkertz.max_variant_ratio(0.5))
    r_ok = True
    for n in range(1, 51):
        for p in (0.1, 0.5, 0.9):
            for q in (0.1, 0.5, 1.0):
                v = np.linspace(q / 400, q, 400)
                r_ok &= bool(np.all(np.diff(maxvariant.r_func(v, n, p, q)) >= -1e-12))
    ok = res < 1e-10 and in_range and mono and gap <= 1e-3 and r_ok
    return ok, (f"lambda_residual={res:.3e} in_range={in_range} nonincreasing={mono} "
                f"bound_gap={gap:.3e} R_monotone={r_ok}")


def c10_noniid(workers: int = 1, **_) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED)
    worst = math.inf
    for k in range(50):
        inst = noniid.random_instance(rng)
        zp = noniid.estimate_opt_probs(inst, 20000, SEED + k)
        s = noniid.build_schedule(inst, zp.z)
        est = noniid.policy_value(inst, s, 20000, SEED + k, workers=workers)
        ratio = est.mean / zp.opt.mean
        se = ratio * math.hypot(est.stderr / est.mean, zp.opt.stderr / zp.opt.mean)
        worst = min(worst, (ratio - 0.5) / se if se > 0 else (math.inf if ratio >= 0.5 else -math.inf))
    tight = noniid.tight_instance(10 ** 4, 1e-4, 0.5).ratio
    ok = worst >= -4.0 and abs(tight - 0.5) <= 0.01
    return ok, f"min_z_above_half={worst:.4f} tight_ratio={_g(tight)}"


def c11_rare(workers: int = 1, **_) -> tuple[bool, str]:
    b = nonadaptive.rare_disruption_bound(1.0)
    n = 10 ** 4
    inst = Instance(n, uniform(), 1.0 / n)
    opt = clairvoyant.opt_value(inst, check=False).value
    est = estimate(inst, AcceptAll(), 16384, SEED, workers=workers).sum
    ratio = est.mean / opt
    ok = abs(b - ONE_MINUS_INV_E) <= 1e-12 and ratio >= ONE_MINUS_INV_E - 0.01
    return ok, f"bound={_g(b)} ratio={_g(ratio)} stderr={est.stderr / opt:.3e}"


STOCHASTIC = (8, 10, 11)


def c12_determinism(**_) -> tuple[bool, str]:
    outs = {}
    for w in (1, 4, 16):
        outs[w] = [CRITERIA[k][1](workers=w) for k in STOCHASTIC]
    same = outs[1] == outs[4] == outs[16]
    return same, f"identical_across_workers={same} criteria={','.join(f'c{k:02d}' for k in STOCHASTIC)}"


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("theta_star", c01_theta_star),
    2: ("nonadaptive_guarantee", c02_nonadaptive_grid),
    3: ("nonadaptive_tightness", c03_hard_instance),
    4: ("eta_monotone", c04_eta_monotone),
    5: ("adaptive_convergence", c05_adaptive),
    6: ("adaptive_upper_bound", c06_upper_bound),
    7: ("dp_structure", c07_dp),
    8: ("benchmark_forms", c08_benchmark),
    9: ("max_variant", c09_max_variant),
    10: ("noniid_half", c10_noniid),
    11: ("rare_disruption", c11_rare),
    12: ("determinism", c12_determinism),
}


def run_criterion(k: int, *, workers: int = 1, fault: str | None = None) -> CriterionResult:
    name, fn = CRITERIA[k]
    t0 = time.perf_counter()
    try:
        ok, detail = fn(workers=workers, fault=fault)
    except Exception as exc:  # a crashing criterion is a failing criterion
        ok, detail = False, f"error {type(exc).__name__}: {exc}"
    return CriterionResult(k, name, bool(ok), detail, time.perf_counter() - t0)


def run_all(*, quick: bool = False, workers: int = 1, fault: str | None = None) -> list[CriterionResult]:
    keys = QUICK if quick else tuple(CRITERIA)
    return [run_criterion(k, workers=workers, fault=fault) for k in keys]
