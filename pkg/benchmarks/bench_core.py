"""Compare the compiled core with the numpy fallback on the hot kernels.

    python benchmarks/bench_core.py [--sizes 128 256 512] [--repeat 5] [--json out.json]

Each kernel runs on both backends with identical inputs; the outputs are
checked for agreement before timings are reported.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from prodt1 import _backend
from prodt1.generators import uniform_space


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    sp = uniform_space(n, seed=seed)
    rho = sp.rho
    labels = rng.integers(0, max(n // 8, 1), n)
    ncubes = int(labels.max()) + 1
    m = max(n // 4, 2)
    dist = rng.random((m, m))
    ell_r = 2.0 ** -rng.integers(0, 4, m).astype(float)
    ell_c = 2.0 ** -rng.integers(0, 4, m).astype(float)
    mu = rng.random(m)
    lam = rng.uniform(0.5, 2.0, (m, m))
    thresh = rng.uniform(0.0, 0.5, (m, m))
    return {
        "greedy_net": lambda: _backend.greedy_net(rho, np.arange(n), 0.05, np.full(n, np.inf)),
        "cube_point_mindist": lambda: _backend.cube_point_mindist(rho, labels, ncubes),
        "group_min_cols": lambda: _backend.group_min_cols(rho, labels, ncubes),
        "minplus": lambda: _backend.minplus(rho),
        "schur_sep": lambda: _backend.schur_sep(dist, ell_r, ell_c, mu, mu, lam, 1.0, thresh),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a), np.asarray(b), rtol=1e-12, atol=0.0, equal_nan=True)


def run(sizes, repeat):
    if not _backend.compiled_available():
        print("compiled core not built; only the fallback can be timed", file=sys.stderr)
    rows = []
    for n in sizes:
        fns = _inputs(n)
        for name, fn in fns.items():
            times, outs = {}, {}
            for which in ("python", "compiled"):
                if which == "compiled" and not _backend.compiled_available():
                    continue
                _backend.use_backend(which)
                outs[which] = fn()
                times[which] = min(timeit.repeat(fn, number=1, repeat=repeat))
            _backend.use_backend("compiled" if _backend.compiled_available() else "python")
            agree = _same(outs["python"], outs["compiled"]) if len(outs) == 2 else None
            py = times["python"]
            co = times.get("compiled")
            rows.append({"kernel": name, "n": n, "python_s": py, "compiled_s": co,
                         "speedup": py / co if co else None, "outputs_agree": agree})
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json")
    args = p.parse_args(argv)
    rows = run(args.sizes, args.repeat)
    print(f"{'kernel':<20}{'n':>6}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}  agree")
    for r in rows:
        co = f"{1e3 * r['compiled_s']:13.3f}" if r["compiled_s"] else f"{'-':>13}"
        sp = f"{r['speedup']:9.1f}" if r["speedup"] else f"{'-':>9}"
        print(f"{r['kernel']:<20}{r['n']:>6}{1e3 * r['python_s']:12.3f}{co}{sp}  {r['outputs_agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["outputs_agree"] is not False for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
