"""Command line entry point: ``prodt1 run`` and ``prodt1 generate``.

Exit codes: 0 when every check passes, 1 when a check fails (the summary is
still written), 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .experiments import DEFAULTS, RUNNERS

SIG = 12
OUT_ENV = "PRODT1_OUT"

# keys that count things and must be >= 1
_COUNTS = {"instances", "trials", "spaces", "grids", "pairs", "symbols", "schur_instances",
           "t1_rectangles", "t1_per_instance", "global_instances", "family_size",
           "surgery_instances", "probability_trials", "covering_seeds", "covering_points",
           "measures", "points", "journe_sets", "max_points"}


# formatting -----------------------------------------------------------------

def fmt_float(x: float) -> float:
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG}g}")


def clean(obj):
    """Plain JSON-able data with floats cut to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIG}g}"
    return str(v)


def rows_to_csv(rows: list) -> str:
    header = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r[k]) if k in r else "" for k in header])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


# configuration -------------------------------------------------------------------

def _check_value(exp, key, value, default):
    where = f"[{exp}] {key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
    elif isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where} must be an integer")
        if key in _COUNTS and value < 1:
            raise ConfigError(f"{where} must be >= 1")
    elif isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{where} must be a number")
        if not value > 0:
            raise ConfigError(f"{where} must be positive")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        if value and not value.startswith("bundled:") and not Path(value).is_file():
            raise ConfigError(f"{where}: file {value!r} not found")
    elif isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where} must be a nonempty list")
    return value


def _validate_params(exp: str, p: dict):
    if exp == "testing":
        if not 0 < p["upsilon"] < 1:
            raise ConfigError("[testing] upsilon must lie in (0, 1)")
        if not 0 < p["theta"] < 1 / 32:
            raise ConfigError("[testing] theta must lie in (0, 1/32)")
        if not 0 < p["surgery_eps"] < 1:
            raise ConfigError("[testing] surgery_eps must lie in (0, 1)")
    if exp == "badness" and any((not isinstance(r, int)) or r < 0 for r in p["r"]):
        raise ConfigError("[badness] r must be nonnegative integers")
    if exp == "carleson":
        for s in p["s"]:
            if not (isinstance(s, list) and len(s) == 2):
                raise ConfigError("[carleson] s must be a list of pairs")


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path!r} not found") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path!r}: {e}") from e


def resolve(raw: dict, experiments=None) -> tuple:
    """(experiment names, per-experiment parameters, top-level options)."""
    names = experiments or raw.get("experiments") or raw.get("experiment")
    if isinstance(names, str):
        names = [names]
    if not names:
        raise ConfigError("no experiment selected")
    for name in names:
        if name not in RUNNERS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(RUNNERS)}")
    params = {}
    # every section in the file is checked, selected or not
    for name in list(dict.fromkeys(list(names) + [k for k in raw if k in RUNNERS])):
        p = dict(DEFAULTS[name])
        for k, v in raw.get(name, {}).items():
            if k not in p:
                raise ConfigError(f"[{name}] unknown key {k!r}")
            p[k] = _check_value(name, k, v, DEFAULTS[name][k])
        _validate_params(name, p)
        params[name] = p
    params = {n: params[n] for n in names}
    for k in raw:
        if k not in RUNNERS and k not in ("experiments", "experiment", "seed", "out", "jobs"):
            raise ConfigError(f"unknown top-level key {k!r}")
    top = {"seed": raw.get("seed", 0), "out": raw.get("out"), "jobs": raw.get("jobs", 1)}
    if not isinstance(top["seed"], int) or top["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if not isinstance(top["jobs"], int) or top["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")
    return names, params, top


# commands ------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        raw = load_config(args.config) if args.config else {}
        names, params, top = resolve(raw, args.experiment or None)
        seed = args.seed if args.seed is not None else top["seed"]
        jobs = args.jobs if args.jobs is not None else top["jobs"]
        if seed < 0 or jobs < 1:
            raise ConfigError("seed must be >= 0 and jobs >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out or top["out"] or os.environ.get(OUT_ENV, "results"))
    out.mkdir(parents=True, exist_ok=True)
    summary = {"seed": seed, "experiments": {}}
    ok = True
    for name in names:
        t0 = time.perf_counter()
        res = RUNNERS[name](params[name], seed, jobs)
        dt = time.perf_counter() - t0
        print(f"{name}: {'pass' if res.passed else 'FAIL'} ({dt:.1f} s)", file=sys.stderr)
        (out / f"{name}-{seed}.csv").write_text(rows_to_csv(res.rows))
        (out / f"{name}-{seed}.json").write_text(dumps({**res.summary(), "params": params[name],
                                                        "detail": {k: v for k, v in res.detail.items()
                                                                   if k != "seconds"}}))
        summary["experiments"][name] = res.summary()
        ok &= res.passed
    summary["pass"] = ok
    (out / "summary.json").write_text(dumps(summary))
    return 0 if ok else 1


def cmd_generate(args) -> int:
    from . import generators as gen
    from .bidisc import DiscreteBidiscMeasure, random_product_measure
    from .space import fit_power_dominating, space_to_dict
    try:
        if args.what == "space":
            if args.n is not None and args.n < 1:
                raise ConfigError("n must be >= 1")
            kind = args.kind or "uniform"
            n = args.n or 64
            if kind == "uniform":
                sp = gen.uniform_space(n, seed=args.seed, metric=args.metric, weights=args.weights)
            elif kind == "shell":
                sp = gen.shell_space(n, seed=args.seed, weights=args.weights)
            elif kind == "multiscale":
                sp = gen.multiscale_space(args.levels, args.branching, seed=args.seed,
                                          weights=args.weights, metric=args.metric)
            elif kind == "snowflake":
                sp = gen.snowflake_space(n, seed=args.seed, weights=args.weights)
            else:
                raise ConfigError(f"unknown space kind {kind!r}")
            dom = fit_power_dominating(sp, args.exponent)
            text = dumps_exact(space_to_dict(sp, dom))
        else:
            kind = args.kind or "random"
            n = args.n or 20
            if n < 1:
                raise ConfigError("n must be >= 1")
            if kind in ("random", "boundary"):
                z, m = gen.bidisc_measure(n, seed=args.seed, kind=kind)
                mu = DiscreteBidiscMeasure(z, m)
            elif kind == "product":
                mu = random_product_measure(n, n, seed=args.seed)
            elif kind == "point":
                mu = DiscreteBidiscMeasure.point_mass()
            else:
                raise ConfigError(f"unknown measure kind {kind!r}")
            text = dumps_exact(mu.to_list())
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def dumps_exact(obj) -> str:
    """JSON with full float precision for instance files."""
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prodt1", description="Product T(1) experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run experiments from a TOML config")
    r.add_argument("experiment", nargs="*", help="experiment names (override the config)")
    r.add_argument("--config", help="TOML configuration file")
    r.add_argument("--seed", type=int, help="override the configured seed")
    r.add_argument("--out", help="output directory")
    r.add_argument("--jobs", type=int, help="worker processes")
    r.set_defaults(func=cmd_run)
    g = sub.add_parser("generate", help="write a random space or bidisc measure")
    g.add_argument("what", choices=["space", "measure"])
    g.add_argument("--kind")
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--metric", default="euclidean", choices=["euclidean", "sup"])
    g.add_argument("--weights", default="uniform", choices=["unit", "uniform", "random", "sparse"])
    g.add_argument("--exponent", type=float, default=2.0)
    g.add_argument("--levels", type=int, default=3)
    g.add_argument("--branching", type=int, default=4)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
