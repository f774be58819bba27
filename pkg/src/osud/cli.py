"""Command-line interface.

Subcommands: ``constants``, ``ratio``, ``curves``, ``schedule`` and
``verify``. Exit codes: 0 success, 1 criterion failure, 2 configuration
error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, InvalidInstanceError, InvalidScheduleError, NumericalError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SCHEMA_VERSION = 1
DEFAULT_P_GRID = (0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


class ConfigError(ValueError):
    """Invalid configuration file or argument combination."""


def fmt(x) -> str:
    """Twelve significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _round(x):
    if isinstance(x, float) and math.isfinite(x):
        return float(format(x, ".12g"))
    return x


def write_csv(header, rows, out) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def load_config(path) -> dict:
    """Read a JSON config; it must carry ``schema_version`` 1."""
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {SCHEMA_VERSION}")
    return data


def merged(args, config: dict, key: str, default=None):
    """Flag value if given, else config value, else ``default``."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    return config.get(key, default)


def parse_dist(spec: str):
    """``uniform``, ``uniform:a,b``, ``point:c``, a fixture name, or ``file:path.json``."""
    from .dist import QuantileDistribution, point_mass, uniform
    from .fixtures import smooth_distributions

    if spec is None:
        raise ConfigError("a distribution is required")
    kind, _, rest = spec.partition(":")
    try:
        if kind == "uniform":
            if not rest:
                return uniform()
            a, b = (float(t) for t in rest.split(","))
            return uniform(a, b)
        if kind == "point":
            return point_mass(float(rest))
        if kind == "file":
            return QuantileDistribution.from_json(Path(rest).read_text())
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad distribution spec {spec!r}: {exc}") from exc
    fixtures = smooth_distributions()
    if spec in fixtures:
        return fixtures[spec]
    raise ConfigError(f"unknown distribution {spec!r}")


# -- constants ---------------------------------------------------------------


def cmd_constants(args) -> int:
    from .hillkertz import lambda_p, lambda_residual, theta_residual, theta_star

    theta = theta_star()
    ps = args.p if args.p else DEFAULT_P_GRID
    rows = [("theta_star", theta, theta_residual(theta)),
            ("one_minus_inv_e", -math.expm1(-1.0), 0.0)]
    write_csv(("name", "value", "residual"), rows, None)
    lam_rows = []
    for p in ps:
        if not 0 < p <= 1:
            raise ConfigError("p must lie in (0, 1]")
        lam = lambda_p(p)
        lam_rows.append((p, lam, -math.expm1(-lam), lambda_residual(p, lam)))
    write_csv(("p", "lambda", "max_variant_ratio", "residual"), lam_rows, None)
    return EXIT_OK


# -- ratio ---------------------------------------------------------------------


def _ratio_report(policy: str, cfg: dict) -> dict:
    from . import adaptive, clairvoyant, maxvariant, nonadaptive
    from .dist import Instance
    from .mc import FixedQuantile, estimate

    tol = float(cfg["tol"])
    if policy == "hard":
        p, beta, n = cfg["p"], cfg["beta"], cfg["n"]
        a1 = cfg["a1"]
        a2 = cfg["a2"] if cfg["a2"] is not None else p * (math.e - 2.0) * a1
        r = nonadaptive.hard_instance_report(a1, a2, beta, p, n)
        bound = -math.expm1(-1.0) + 0.01
        return {"policy": policy, "n": n, "p": p, "a1": a1, "a2": a2, "beta": beta,
                "alg_value": r.alg_value, "opt_value": r.opt_value, "ratio": r.ratio,
                "bound": bound, "bound_kind": "upper", "passed": r.ratio <= bound + tol}

    inst = Instance(int(cfg["n"]), parse_dist(cfg["dist"]), float(cfg["p"]), float(cfg["zeta"]))
    out = {"policy": policy, "n": inst.n, "p": inst.p, "zeta": inst.zeta, "dist": cfg["dist"]}
    if policy == "nonadaptive":
        q = nonadaptive.optimal_quantile(inst.n, inst.p)
        alg = nonadaptive.alg_value(inst, q)
        opt = clairvoyant.opt_value(inst, check=False).value
        bound = -math.expm1(-1.0)
        out["q"] = q
    elif policy == "adaptive":
        s = adaptive.solve_schedule(inst.n, inst.p, inst.zeta)
        alg = adaptive.alg_value(inst, s)
        opt = clairvoyant.opt_value(inst, check=False).value
        bound = adaptive.guarantee(inst.n, inst.p, s)
        out["theta_n"] = s.theta_n
    elif policy == "max":
        lam, _ = maxvariant.cr_lower_bound_max(inst.n, inst.p)
        rep = maxvariant.report(inst)
        alg, opt, bound = rep.alg_value, rep.opt_value, rep.lower_bound
        out["q"] = rep.q
    else:
        raise ConfigError(f"unknown policy {policy!r}")
    if cfg.get("simulate"):
        if cfg.get("seed") is None:
            raise ConfigError("simulation needs --seed")
        if policy != "nonadaptive":
            raise ConfigError("simulation is available for the nonadaptive policy")
        est = estimate(inst, FixedQuantile(out["q"]), int(cfg["trials"]), int(cfg["seed"]),
                       workers=int(cfg["workers"])).sum
        alg = est.mean
        out["alg_stderr"] = est.stderr
        out["trials"] = int(cfg["trials"])
        out["seed"] = int(cfg["seed"])
    ratio = alg / opt
    out.update({"alg_value": alg, "opt_value": opt, "ratio": ratio, "bound": bound,
                "bound_kind": "lower", "passed": ratio >= bound - tol})
    return out


def cmd_ratio(args) -> int:
    config = load_config(args.config)
    cfg = {
        "n": merged(args, config, "n", 10),
        "p": merged(args, config, "p", 0.5),
        "zeta": merged(args, config, "zeta", 0.0),
        "dist": merged(args, config, "dist", "uniform"),
        "tol": merged(args, config, "tol", 1e-9),
        "beta": merged(args, config, "beta", 200.0),
        "a1": merged(args, config, "a1", 1.0),
        "a2": merged(args, config, "a2", None),
        "simulate": merged(args, config, "simulate", False),
        "trials": merged(args, config, "trials", 100000),
        "seed": merged(args, config, "seed", None),
        "workers": merged(args, config, "workers", 1),
    }
    policy = merged(args, config, "policy", "nonadaptive")
    rep = _ratio_report(policy, cfg)
    fmt_kind = merged(args, config, "format", "json")
    out = merged(args, config, "output", None)
    if fmt_kind == "json":
        text = json.dumps({"schema_version": SCHEMA_VERSION, **{k: _round(v) for k, v in rep.items()}},
                          indent=2, sort_keys=True) + "\n"
        if out is None:
            sys.stdout.write(text)
        else:
            Path(out).write_text(text)
    elif fmt_kind == "csv":
        keys = sorted(rep)
        write_csv(keys, [[rep[k] for k in keys]], out)
    else:
        raise ConfigError("format must be json or csv")
    return EXIT_OK if rep["passed"] else EXIT_FAIL


# -- curves ------------------------------------------------------------------


THETA_NS = (2, 3, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
ETA_NS = (1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)
ETA_PS = (0.1, 0.3, 0.5, 0.7, 0.9)


def lambda_curve_rows(points: int = 99):
    from .maxvariant import ratio_curve
    ps = np.linspace(0.01, 1.0, points)
    return [tuple(r) for r in ratio_curve(ps)]


def theta_rows(p: float = 0.5):
    from .adaptive import guarantee, solve_schedule
    rows = []
    for n in THETA_NS:
        s = solve_schedule(n, p)
        rows.append((n, s.theta_n, guarantee(n, p, s)))
    return rows


def eta_rows():
    from .nonadaptive import eta_at_optimum
    return [(n, *(eta_at_optimum(n, p) for p in ETA_PS)) for n in ETA_NS]


def cmd_curves(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = ("lambda", "theta", "eta") if args.kind == "all" else (args.kind,)
    if "lambda" in kinds:
        write_csv(("p", "lambda", "ratio"), lambda_curve_rows(args.points), out_dir / "lambda_curve.csv")
    if "theta" in kinds:
        write_csv(("n", "theta_n", "guarantee"), theta_rows(args.p), out_dir / "theta_convergence.csv")
    if "eta" in kinds:
        write_csv(("n", *(f"eta_p{p:g}" for p in ETA_PS)), eta_rows(), out_dir / "eta_table.csv")
    return EXIT_OK


# -- schedule ------------------------------------------------------------------


def cmd_schedule(args) -> int:
    from .adaptive import guarantee, solve_schedule
    s = solve_schedule(args.n, args.p, args.zeta)
    data = {"schema_version": SCHEMA_VERSION, **s.to_dict(), "guarantee": guarantee(args.n, args.p, s),
            "residuals": s.residuals()}
    text = json.dumps(data, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- verify ------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .acceptance import run_all
    results = run_all(quick=args.quick, workers=args.workers, fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [f"c{r.number:02d}" for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {','.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osud", description="Online selection with uncertain disruption.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="print theta*, 1-1/e and lambda(p)")
    c.add_argument("--p", type=float, action="append", help="p value (repeatable)")
    c.set_defaults(func=cmd_constants)

    r = sub.add_parser("ratio", help="value, benchmark, ratio and bound for one instance")
    r.add_argument("--config", help="JSON config with schema_version 1; flags override it")
    r.add_argument("--policy", choices=("nonadaptive", "adaptive", "max", "hard"))
    r.add_argument("--dist", help="uniform[:a,b], point:c, file:path.json or a fixture name")
    r.add_argument("--n", type=int)
    r.add_argument("--p", type=float)
    r.add_argument("--zeta", type=float)
    r.add_argument("--beta", type=float, help="hard preset: size of the a2 block")
    r.add_argument("--a1", type=float)
    r.add_argument("--a2", type=float)
    r.add_argument("--tol", type=float)
    r.add_argument("--simulate", action="store_true", default=None)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--format", choices=("json", "csv"))
    r.add_argument("--output")
    r.set_defaults(func=cmd_ratio)

    cu = sub.add_parser("curves", help="write CSV curves")
    cu.add_argument("--kind", choices=("lambda", "theta", "eta", "all"), default="all")
    cu.add_argument("--out-dir", default=".")
    cu.add_argument("--points", type=int, default=100)
    cu.add_argument("--p", type=float, default=0.5, help="p for the theta table")
    cu.set_defaults(func=cmd_curves)

    s = sub.add_parser("schedule", help="solve the adaptive schedule and print it as JSON")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--zeta", type=float, default=0.0)
    s.add_argument("--output")
    s.set_defaults(func=cmd_schedule)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--inject-fault", choices=("theta_star",), default=None)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, InvalidInstanceError, InvalidScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
