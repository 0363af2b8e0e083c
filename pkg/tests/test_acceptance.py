"""Acceptance suite: one PASS/FAIL line per criterion, default constants, seed 0.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import math
import time

import pytest

from prodt1 import bidisc as bd
from prodt1.experiments import DEFAULTS, RUNNERS

SEED = 0
LINES = {}

# pinned tolerances
GRAM_TOL = 1e-10
SCHUR_TOL = 1e-6
T1_TOL = 1e-8
POINT_MASS_TOL = 1e-12
REPRO_TOL = 1e-9
HARDY_TOL = 1e-9
BAND_MAX = 1e3
AXIOMS_SECONDS = 60.0
BIDISC_SECONDS = 300.0

_cache = {}


def _run(name):
    if name not in _cache:
        t0 = time.perf_counter()
        res = RUNNERS[name](dict(DEFAULTS[name]), SEED)
        _cache[name] = (res, time.perf_counter() - t0)
    return _cache[name]


def _report(num, title, ok, detail):
    LINES[num] = f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {title}: {detail}"
    assert ok, LINES[num]


def test_criterion_01_dyadic_axioms():
    res, dt = _run("axioms")
    c = DEFAULTS["axioms"]
    ok = (res.checks["axioms_zero_violations"] and res.constants["total_violations"] == 0
          and c["instances"] == 100 and c["max_points"] <= 512 and dt <= AXIOMS_SECONDS)
    _report(1, "dyadic axioms", ok,
            f"{c['instances']} spaces, violations={res.constants['total_violations']}, "
            f"max A0={res.constants['max_A0']:g}, {dt:.1f} s <= {AXIOMS_SECONDS:g} s")


def test_criterion_02_haar():
    res, _ = _run("haar")
    g, p = res.constants["max_gram_deviation"], res.constants["max_project_lift_deviation"]
    ok = g <= GRAM_TOL and p <= GRAM_TOL and DEFAULTS["haar"]["instances"] == 100
    _report(2, "Haar orthonormality", ok, f"gram dev={g:.2e}, project-lift dev={p:.2e} (tol {GRAM_TOL:g})")


def test_criterion_03_badness_decay():
    res, _ = _run("badness")
    c = DEFAULTS["badness"]
    n = res.constants["spaces_nonincreasing"]
    ok = (res.checks["badness_decay"] and n >= 9 and c["spaces"] == 10 and c["trials"] == 200
          and list(c["r"]) == [1, 2, 3])
    _report(3, "badness decay", ok, f"nonincreasing on {n}/{c['spaces']} spaces (need >= 9)")


def test_criterion_04_duality():
    res, _ = _run("norms")
    C = DEFAULTS["norms"]["C"]
    m = res.constants["duality_max"]
    ok = m <= C <= 10 and DEFAULTS["norms"]["grids"] * DEFAULTS["norms"]["pairs"] == 100
    _report(4, "duality bound", ok, f"max ratio={m:.4f} <= C={C:g} <= 10")


def test_criterion_05_paraproducts():
    res, _ = _run("paraproducts")
    C = DEFAULTS["paraproducts"]["C"]
    keys = ("max_pi_a_ratio", "max_pi_full_ratio", "max_pi_mixed_ratio", "max_box_constant")
    vals = {k: res.constants[k] for k in keys}
    ok = all(v <= C for v in vals.values()) and all(res.checks.values())
    _report(5, "paraproduct boundedness", ok,
            ", ".join(f"{k}={v:.4f}" for k, v in vals.items()) + f" (C={C:g})")


def test_criterion_06_schur():
    res, _ = _run("testing")
    c = DEFAULTS["testing"]
    a = res.constants["schur_agreement"]
    sep, inn = res.constants["schur_max_sep"], res.constants["schur_max_in"]
    ok = (a <= SCHUR_TOL and sep <= c["schur_budget_sep"] and inn <= c["schur_budget_in"]
          and c["schur_instances"] == 20)
    _report(6, "Schur matrices", ok,
            f"power vs SVD={a:.2e} (tol {SCHUR_TOL:g}), sep={sep:.3e} <= {c['schur_budget_sep']:g}, "
            f"in={inn:.3e} <= {c['schur_budget_in']:g}")


def test_criterion_07_t1_pairing():
    res, _ = _run("testing")
    s = res.constants["t1_max_relative_spread"]
    ok = s <= T1_TOL and DEFAULTS["testing"]["t1_rectangles"] == 50
    _report(7, "T(1) pairing ball independence", ok, f"max relative spread={s:.2e} (tol {T1_TOL:g})")


def test_criterion_08_global_testing():
    res, _ = _run("testing")
    b = res.constants["global_max_band"]
    ok = res.checks["cauchy_schwarz"] and b <= BAND_MAX and DEFAULTS["testing"]["global_instances"] == 20
    _report(8, "global testing vs norm", ok,
            f"Cauchy-Schwarz={'ok' if res.checks['cauchy_schwarz'] else 'violated'}, "
            f"band in [{res.constants['global_min_band']:.3f}, {b:.3f}] <= {BAND_MAX:g}")


def test_criterion_09_bidisc():
    t0 = time.perf_counter()
    res, _ = _run("carleson")
    pm = max(abs(bd.embedding_constant(bd.DiscreteBidiscMeasure.point_mass(), (0.0, 0.0), N) - 1)
             for N in (0, 1, 4, 16, 64))
    dt = time.perf_counter() - t0
    c = res.constants
    ok = (pm <= POINT_MASS_TOL and abs(c["point_mass_embedding"] - 1) <= POINT_MASS_TOL
          and c["reproducing_error"] <= REPRO_TOL and c["hardy_sum_error"] <= HARDY_TOL
          and res.checks["carleson_band"] and DEFAULTS["carleson"]["measures"] == 30
          and DEFAULTS["carleson"]["N"] == 16 and dt <= BIDISC_SECONDS)
    _report(9, "bidisc embedding", ok,
            f"point mass err={pm:.1e}, reproducing={c['reproducing_error']:.1e}, "
            f"Hardy err={c['hardy_sum_error']:.1e}, log-ratio band [{c['log_ratio_min']:.4f}, "
            f"{c['log_ratio_max']:.4f}] <= {math.log(2):.4f}, {dt:.1f} s")


def test_criterion_10_surgery_covering():
    res, _ = _run("testing")
    cov = res.constants["covering_mean"]
    ok = (res.checks["surgery_decomposition"] and res.checks["surgery_inclusions"]
          and res.checks["surgery_probability_monotone"] and cov >= 1 - DEFAULTS["testing"]["upsilon"]
          and res.checks["covering_geometry"] and DEFAULTS["testing"]["covering_seeds"] == 20)
    _report(10, "surgery and covering", ok,
            f"decomposition={'exact' if res.checks['surgery_decomposition'] else 'broken'}, "
            f"coverage={cov:.4f} >= {1 - DEFAULTS['testing']['upsilon']:g}, "
            f"probability monotone={res.checks['surgery_probability_monotone']}")


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    for k in sorted(LINES):
        print(LINES[k])
    sys.exit(1 if failed else 0)
