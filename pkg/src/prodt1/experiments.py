"""Batch experiments shared by the command line tool and the acceptance suite.

Every experiment is a list of independent instances.  Instance ``i`` of a
run with seed ``s`` draws all randomness from ``SeedSequence([s, i])``, so
results do not depend on how many worker processes execute them.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from . import bidisc as bd
from . import paraproducts as pp
from . import testing as tt
from .dyadic import build_system, check_axioms, default_delta
from .generators import multiscale_space, shell_space, snowflake_space, uniform_space
from .goodness import Frame, GoodnessParams, badness_probability
from .haar import build_haar
from .kernels import KernelOperator, dense_norm, product_kernel, riesz_factor, size_factor
from .productseq import AdmissibleOpenSet, ProductFrame, norm_report
from .space import fit_power_dominating, space_from_dict, validate_space


def instance_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1, np.uint32)[0])


def _rng(seed, i):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


@dataclass
class ExperimentResult:
    name: str
    seed: int
    rows: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def summary(self) -> dict:
        return {"experiment": self.name, "seed": self.seed, "constants": self.constants,
                "checks": self.checks, "pass": self.passed}


def _map(fn: Callable, args: list, jobs: int) -> list:
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*args)))


def read_data(name: str) -> str:
    """Text of a file bundled in the package data directory."""
    return resources.files("prodt1").joinpath("data").joinpath(name).read_text()


def load_bundled_space(name: str = "space64.json"):
    import json
    return space_from_dict(json.loads(read_data(name)))


def load_space_file(path):
    import json
    if str(path).startswith("bundled:"):
        return load_bundled_space(str(path).split(":", 1)[1])
    with open(path) as fh:
        return space_from_dict(json.load(fh))


# 1. dyadic axioms -----------------------------------------------------------------

def _axioms_instance(seed, i, max_points):
    rng = _rng(seed, i)
    kind = ["uniform", "shell", "multiscale", "snowflake"][i % 4]
    s = int(rng.integers(0, 2 ** 31))
    if kind == "uniform":
        sp = uniform_space(int(rng.integers(8, max_points + 1)), seed=s,
                           metric=["euclidean", "sup"][int(rng.integers(2))])
    elif kind == "shell":
        sp = shell_space(int(rng.integers(8, max_points + 1)), seed=s)
    elif kind == "multiscale":
        br = int(rng.integers(2, 5))
        lv = 3 if br ** 4 > max_points else 4
        sp = multiscale_space(lv, br, seed=s)
    else:
        sp = snowflake_space(int(rng.integers(8, max_points + 1)), power=2.0, seed=s)
    t0 = time.perf_counter()
    sys = build_system(sp, m=0, k=3, seed=s)
    rep = check_axioms(sys)
    dt = time.perf_counter() - t0
    return {"instance": i, "kind": kind, "n": sp.n, "A0": sp.A0, "cubes": len(sys.cubes),
            "violations": len(rep)}, dt


def run_axioms(cfg: dict, seed: int, jobs: int = 1) -> ExperimentResult:
    res = ExperimentResult("axioms", seed)
    out = _map(_axioms_instance, [(seed, i, cfg["max_points"]) for i in range(cfg["instances"])], jobs)
    res.rows = [r for r, _ in out]
    res.detail["seconds"] = float(sum(d for _, d in out))
    total = sum(r["violations"] for r in res.rows)
    res.constants["total_violations"] = total
    res.constants["max_A0"] = max(r["A0"] for r in res.rows)
    res.checks["axioms_zero_violations"] = total == 0
    if cfg.get("space"):
        sp, dom = load_space_file(cfg["space"])
        vrep = validate_space(sp, dom)
        arep = check_axioms(build_system(sp, m=0, k=3, seed=seed))
        res.constants["space_violations"] = len(vrep)
        res.constants["space_axiom_violations"] = len(arep)
        res.detail["space_report"] = vrep.to_dict() + arep.to_dict()
        res.checks["space_valid"] = len(vrep) == 0 and len(arep) == 0
    return res


# 2. Haar orthonormality ------------------------------------------------------------

def _frames(seed, i, levels=3, branching=3, r=1, alpha=1.0, t_lambda=2.0):
    """Two factors, each with a small grid D, a container grid D', and frames."""
    rng = _rng(seed, i)
    params = GoodnessParams.from_constants(r, alpha, t_lambda)
    out = []
    for _ in range(2):
        s = int(rng.integers(0, 2 ** 31))
        sp = multiscale_space(levels, branching, seed=s)
        D = build_system(sp, m=0, k=levels, seed=int(rng.integers(0, 2 ** 31)))
        Dp = build_system(sp, m=0, k=levels, seed=int(rng.integers(0, 2 ** 31)))
        out.append((sp, D, Dp))
    return out, params, rng


def _haar_instance(seed, i):
    (f1, f2), params, rng = _frames(seed, i)
    worst_gram = 0.0
    for sp, D, _ in (f1, f2):
        B = build_haar(D)
        for c in D.cubes:
            rows = np.flatnonzero(B.row_cube == c.id)
            if rows.size:
                G = B.gram(rows)
                worst_gram = max(worst_gram, float(np.max(np.abs(G - np.eye(rows.size)))))
        rows = B.expansion_rows()
        G = B.gram(rows)
        worst_gram = max(worst_gram, float(np.max(np.abs(G - np.eye(rows.size)))))
    fr1 = Frame(build_haar(f1[1]), f1[2], params)
    fr2 = Frame(build_haar(f2[1]), f2[2], params)
    pf = ProductFrame(fr1, fr2)
    c = pf.coefficients(rng.normal(size=(fr1.n_rows, fr2.n_rows)))
    F = pf.project(c)
    back = pf.project(pf.lift(F))
    dev_fn = float(np.max(np.abs(back - F))) if F.size else 0.0
    dev_coef = float(np.max(np.abs(pf.lift(F).values - c.values))) if c.values.size else 0.0
    return {"instance": i, "gram_deviation": worst_gram, "project_lift_deviation": dev_fn,
            "lift_project_deviation": dev_coef, "rows1": fr1.n_rows, "rows2": fr2.n_rows}


def run_haar(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("haar", seed)
    res.rows = _map(_haar_instance, [(seed, i) for i in range(cfg["instances"])], jobs)
    g = max(r["gram_deviation"] for r in res.rows)
    p = max(max(r["project_lift_deviation"], r["lift_project_deviation"]) for r in res.rows)
    res.constants.update(max_gram_deviation=g, max_project_lift_deviation=p)
    res.checks["gram_within_tol"] = g <= cfg["tol"]
    res.checks["project_lift_within_tol"] = p <= cfg["tol"]
    return res


# 3. badness decay ---------------------------------------------------------------------

def _badness_instance(seed, i, trials, r_values):
    rng = _rng(seed, i)
    s = int(rng.integers(0, 2 ** 31))
    kind = ["multiscale", "uniform"][i % 2]
    sp = multiscale_space(3, 3 + i % 2, seed=s) if kind == "multiscale" else uniform_space(64, seed=s)
    params = GoodnessParams.from_constants(r_values[0], 1.0, 2.0)
    out = badness_probability(sp, None, 0, 3, params, trials, s, r_values=r_values)
    means = [out[r].mean for r in r_values]
    ses = [out[r].stderr for r in r_values]
    ok = all(means[j + 1] <= means[j] + 2 * math.hypot(ses[j], ses[j + 1]) + 1e-15
             for j in range(len(means) - 1))
    row = {"space": i, "kind": kind, "n": sp.n, "nonincreasing": ok}
    for r, m, e in zip(r_values, means, ses):
        row[f"mean_r{r}"] = m
        row[f"se_r{r}"] = e
    return row


def run_badness(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("badness", seed)
    rv = list(cfg["r"])
    res.rows = _map(_badness_instance, [(seed, i, cfg["trials"], rv) for i in range(cfg["spaces"])], jobs)
    good = sum(r["nonincreasing"] for r in res.rows)
    res.constants["spaces_nonincreasing"] = good
    res.checks["badness_decay"] = good >= cfg["min_passing"]
    return res


# 4. duality -------------------------------------------------------------------------------

def _norms_instance(seed, i, pairs):
    (f1, f2), params, rng = _frames(seed, i)
    fr1 = Frame(build_haar(f1[1]), f1[2], params)
    fr2 = Frame(build_haar(f2[1]), f2[2], params)
    pf = ProductFrame(fr1, fr2)
    shape = (fr1.n_rows, fr2.n_rows)
    rows = []
    for j in range(pairs):
        s = rng.normal(size=shape) * (rng.random(shape) < rng.uniform(0.1, 1.0))
        mode = j % 3
        if mode == 0:
            t = rng.normal(size=shape)
        elif mode == 1:
            t = s + 0.1 * rng.normal(size=shape)
        else:
            t = np.sign(s) * rng.random(shape)
        rep = norm_report(pf.coefficients(s), pf.coefficients(t), pf)
        rows.append({"grid": i, "pair": j, **rep})
    return rows


def run_norms(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("norms", seed)
    per = _map(_norms_instance, [(seed, i, cfg["pairs"]) for i in range(cfg["grids"])], jobs)
    res.rows = [r for rows in per for r in rows]
    worst = max(r["duality_ratio"] for r in res.rows)
    res.constants.update(duality_max=worst, duality_C=cfg["C"])
    res.checks["duality_bound"] = worst <= cfg["C"] and cfg["C"] <= 10
    return res


# 5. paraproducts ------------------------------------------------------------------------------

def _para_instance(seed, i):
    (f1, f2), params, rng = _frames(seed, i)
    fr1 = Frame(build_haar(f1[1]), f1[2], params)
    fr2 = Frame(build_haar(f2[1]), f2[2], params)
    fr2s = Frame(build_haar(f2[2]), f2[1], params)
    a = rng.normal(size=f2[0].n) * rng.uniform(0.1, 3.0)
    b = rng.normal(size=(f1[0].n, f2[0].n))
    one = pp.pi_one_norm_check(a, fr2)
    full = pp.pi_full_norm_check(b, fr1, fr2)
    mixed = pp.pi_mixed_bound_check(b, fr1, fr2s)
    return {"symbol": i, "pi_a_norm": one["operator_norm"], "pi_a_bmo": one["bmo"],
            "pi_a_ratio": one["ratio"], "box_constant": one["box_constant"],
            "embedding_ok": one["embedding_ok"],
            "pi_full_norm": full["operator_norm"], "pi_full_bmo": full["bmo"],
            "pi_full_ratio": full["ratio"],
            "pi_mixed_norm": mixed["operator_norm"], "pi_mixed_bmo": mixed["bmo"],
            "pi_mixed_ratio": mixed["ratio"]}


def run_paraproducts(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("paraproducts", seed)
    res.rows = _map(_para_instance, [(seed, i) for i in range(cfg["symbols"])], jobs)
    C = cfg["C"]
    for k in ("pi_a_ratio", "pi_full_ratio", "pi_mixed_ratio", "box_constant"):
        res.constants[f"max_{k}"] = max(r[k] for r in res.rows)
    res.constants["C"] = C
    res.checks["pi_a_bounded"] = res.constants["max_pi_a_ratio"] <= C
    res.checks["pi_full_bounded"] = res.constants["max_pi_full_ratio"] <= C
    res.checks["pi_mixed_bounded"] = res.constants["max_pi_mixed_ratio"] <= C
    res.checks["carleson_boxes"] = res.constants["max_box_constant"] <= C
    res.checks["embedding_bound"] = all(r["embedding_ok"] for r in res.rows)
    return res


# 6-8, 10. testing conditions -------------------------------------------------------------------

def _schur_instance(seed, i):
    rng = _rng(seed, i)
    s = int(rng.integers(0, 2 ** 31))
    sp = multiscale_space(3, 3 + i % 2, seed=s)
    dom = fit_power_dominating(sp, 2.0)
    D = build_system(sp, m=0, k=3, seed=int(rng.integers(0, 2 ** 31)))
    Dp = build_system(sp, m=0, k=3, seed=int(rng.integers(0, 2 ** 31)))
    params = GoodnessParams.from_constants(1, 1.0, 2.0)
    R = tt.schur_matrices(D, Dp, dom, 1.0, params)
    return {"instance": i, "sep_power": R.sep_norm, "sep_svd": R.sep_svd,
            "in_power": R.in_norm, "in_svd": R.in_svd,
            "sep_entries": int(np.count_nonzero(R.A_sep)), "in_entries": int(np.count_nonzero(R.A_in))}


def _kernel_pair(rng, n1, n2, kinds=("size", "riesz")):
    s1 = uniform_space(n1, seed=int(rng.integers(0, 2 ** 31)))
    s2 = uniform_space(n2, seed=int(rng.integers(0, 2 ** 31)))
    d1 = fit_power_dominating(s1, 2.0)
    d2 = fit_power_dominating(s2, 2.0)
    facs = []
    for sp, dom in ((s1, d1), (s2, d2)):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "size":
            facs.append(size_factor(sp, dom))
        else:
            facs.append(riesz_factor(sp, dom, direction=rng.normal(size=2)))
    return s1, s2, d1, d2, product_kernel(*facs)


def _t1_instance(seed, i, per_instance):
    (f1, f2), params, rng = _frames(seed, 10_000 + i)
    facs = []
    for sp in (f1[0], f2[0]):
        dom = fit_power_dominating(sp, 2.0)
        facs.append(size_factor(sp, dom) if rng.random() < 0.5
                    else riesz_factor(sp, dom, direction=rng.normal(size=2)))
    K = product_kernel(*facs)
    T = KernelOperator(K, f1[0], f2[0])
    fr1 = Frame(build_haar(f1[1]), f1[2], params)
    fr2 = Frame(build_haar(f2[1]), f2[2], params)
    rows = []
    for j in range(per_instance):
        r1 = int(fr1.rows[rng.integers(fr1.n_rows)])
        r2 = int(fr2.rows[rng.integers(fr2.n_rows)])
        U = tt.minimal_ball(fr1.basis, r1, K.C_K)
        V = tt.minimal_ball(fr2.basis, r2, K.C_K)
        vals = []
        scale = tt.pairing_scale(T, fr1.basis, r1, fr2.basis, r2)
        R1, R2 = 2 * f1[0].diameter, 2 * f2[0].diameter
        for t in (0.0, 0.5, 1.0):
            # nested balls from the minimal one up to the whole space
            u = (U[0], U[1] ** (1 - t) * R1 ** t)
            v_ = (V[0], V[1] ** (1 - t) * R2 ** t)
            v = tt.t1_pairing(T, fr1.basis, r1, fr2.basis, r2, u, v_)
            vals.append(v)
        spread = max(vals) - min(vals)
        rows.append({"instance": i, "rect": j, "value": vals[0], "spread": spread,
                     "relative_spread": spread / scale if scale > 0 else 0.0})
    return rows


def _family(rng, s1, s2, count):
    fam = []
    for _ in range(count):
        m = np.zeros((s1.n, s2.n), bool)
        for _ in range(int(rng.integers(1, 4))):
            c1, c2 = int(rng.integers(s1.n)), int(rng.integers(s2.n))
            r1 = rng.uniform(0.1, 0.8)
            r2 = rng.uniform(0.1, 0.8)
            m |= np.outer(s1.rho[c1] < r1, s2.rho[c2] < r2)
        fam.append(m)
    return fam


def _global_instance(seed, i, family_size):
    rng = _rng(seed, 20_000 + i)
    s1, s2, d1, d2, K = _kernel_pair(rng, 12 + i % 5, 10 + i % 4)
    T = KernelOperator(K, s1, s2)
    fam = _family(rng, s1, s2, family_size)
    nrm = dense_norm(T)
    rep = tt.global_testing(T, fam)
    ok, worst = tt.cauchy_schwarz_check(T, fam, nrm)
    C = max(c.constant for c in rep.conditions)
    band = nrm / math.sqrt(C) if C > 0 else float("inf")
    pairs = [(b1, b2) for b1, b2 in zip(tt.random_balls(s1, 10, int(rng.integers(1 << 30))),
                                        tt.random_balls(s2, 10, int(rng.integers(1 << 30))))]
    wb = tt.weak_boundedness(T, pairs, eps=0.1)
    return {"instance": i, "operator_norm": nrm, "global_constant": C, "band": band,
            "cauchy_schwarz_ok": ok, "cauchy_schwarz_ratio": worst,
            **{c.name: c.constant for c in wb.conditions}}


def _surgery_instance(seed, i, eps):
    rng = _rng(seed, 30_000 + i)
    s = int(rng.integers(0, 2 ** 31))
    sp = multiscale_space(3, 3, seed=s) if i % 2 else uniform_space(48, seed=s)
    D = build_system(sp, m=0, k=3, seed=int(rng.integers(0, 2 ** 31)))
    Dp = build_system(sp, m=0, k=3, seed=int(rng.integers(0, 2 ** 31)))
    r = 1
    tested = dec = inc = 0
    for q in range(len(D.cubes)):
        if D.gen_of[q] >= D.k:
            continue
        for qp in range(len(Dp.cubes)):
            l, lp = D.ell[q], Dp.ell[qp]
            if not (D.delta ** r * lp <= l * (1 + 1e-12) and l <= lp * (1 + 1e-12)):
                continue
            S = tt.surgery(D, q, Dp, qp, eps, r)
            tested += 1
            dec += S.decomposition_ok()
            inc += S.inclusions_ok()
    return {"instance": i, "pairs": tested, "decomposition_ok": dec, "inclusions_ok": inc}


def _covering_instance(seed, i, theta, k, upsilon, n):
    sp = uniform_space(n, seed=instance_seed(seed, 40_000 + i))
    cov = tt.ball_covering(sp, theta, k, upsilon, seed=instance_seed(seed, 50_000 + i))
    return {"seed_index": i, "coverage": cov.coverage, "balls": int(cov.centers.size),
            "attempts": cov.attempts, "radii_ok": cov.radii_ok(),
            "separation_ok": cov.separation_ok(sp)}


def run_testing(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("testing", seed)
    # Schur matrices
    schur = _map(_schur_instance, [(seed, i) for i in range(cfg["schur_instances"])], jobs)
    agree = max(max(abs(r["sep_power"] - r["sep_svd"]) / max(1.0, r["sep_svd"]),
                    abs(r["in_power"] - r["in_svd"]) / max(1.0, r["in_svd"])) for r in schur)
    res.constants.update(schur_max_sep=max(r["sep_svd"] for r in schur),
                         schur_max_in=max(r["in_svd"] for r in schur), schur_agreement=agree,
                         schur_budget_sep=cfg["schur_budget_sep"], schur_budget_in=cfg["schur_budget_in"])
    res.checks["schur_matches_svd"] = agree <= 1e-6
    res.checks["schur_within_budget"] = (res.constants["schur_max_sep"] <= cfg["schur_budget_sep"]
                                         and res.constants["schur_max_in"] <= cfg["schur_budget_in"])
    # T(1) pairing
    per = cfg["t1_per_instance"]
    n_inst = -(-cfg["t1_rectangles"] // per)
    t1 = [r for rows in _map(_t1_instance, [(seed, i, per) for i in range(n_inst)], jobs) for r in rows]
    t1 = t1[:cfg["t1_rectangles"]]
    res.constants["t1_max_relative_spread"] = max(r["relative_spread"] for r in t1)
    res.checks["t1_ball_independent"] = res.constants["t1_max_relative_spread"] <= cfg["t1_tol"]
    # global testing
    gl = _map(_global_instance, [(seed, i, cfg["family_size"]) for i in range(cfg["global_instances"])], jobs)
    res.constants["global_max_band"] = max(r["band"] for r in gl)
    res.constants["global_min_band"] = min(r["band"] for r in gl)
    res.constants["cauchy_schwarz_max_ratio"] = max(r["cauchy_schwarz_ratio"] for r in gl)
    for name in ("weak_full", "weak_bmo_1", "weak_bmo_2", "weak_point_1", "weak_point_2"):
        res.constants[f"max_{name}"] = max(r[name] for r in gl)
    res.checks["cauchy_schwarz"] = all(r["cauchy_schwarz_ok"] for r in gl)
    res.checks["global_band"] = res.constants["global_max_band"] <= cfg["band_max"]
    # surgery
    sg = _map(_surgery_instance, [(seed, i, cfg["surgery_eps"]) for i in range(cfg["surgery_instances"])], jobs)
    pairs = sum(r["pairs"] for r in sg)
    res.constants["surgery_pairs"] = pairs
    res.checks["surgery_decomposition"] = pairs > 0 and all(r["decomposition_ok"] == r["pairs"] for r in sg)
    res.checks["surgery_inclusions"] = all(r["inclusions_ok"] == r["pairs"] for r in sg)
    prob = tt.surgery_probability(uniform_space(64, seed=instance_seed(seed, 60_000)), default_delta(1.0),
                                  0, 2, cfg["probability_eps"], cfg["probability_trials"], seed)
    res.constants["surgery_probability"] = [float(x) for x in prob.mean]
    res.checks["surgery_probability_monotone"] = prob.nonincreasing()
    # coverings
    cv = _map(_covering_instance, [(seed, i, cfg["theta"], cfg["theta_power"], cfg["upsilon"],
                                    cfg["covering_points"]) for i in range(cfg["covering_seeds"])], jobs)
    res.constants["covering_mean"] = float(np.mean([r["coverage"] for r in cv]))
    res.checks["covering"] = res.constants["covering_mean"] >= 1 - cfg["upsilon"]
    res.checks["covering_geometry"] = all(r["radii_ok"] and r["separation_ok"] for r in cv)
    res.rows = ([{"part": "schur", **r} for r in schur] + [{"part": "t1", **r} for r in t1]
                + [{"part": "global", **r} for r in gl] + [{"part": "surgery", **r} for r in sg]
                + [{"part": "covering", **r} for r in cv])
    return res


# 9. bidisc -------------------------------------------------------------------------------------

def _carleson_instance(seed, i, N, s_values, points):
    rng = _rng(seed, 70_000 + i)
    s = tuple(s_values[i % len(s_values)])
    if i % 3 == 2:
        mu = bd.random_product_measure(4, 4, seed=int(rng.integers(1 << 30)))
    else:
        from .generators import bidisc_measure
        z, m = bidisc_measure(points, seed=int(rng.integers(1 << 30)),
                              kind=["random", "boundary"][i % 2])
        mu = bd.DiscreteBidiscMeasure(z, m)
    rep = bd.carleson_report(mu, s, N, seed=int(rng.integers(1 << 30)))
    return {"measure": i, "s1": s[0], "s2": s[1], "n": mu.n, "embedding": rep.embedding,
            "t_norm": rep.t_norm, "log_ratio": rep.ratios.get("log_embedding_over_norm", 0.0),
            "product": rep.product_measure,
            "global_over_norm2": rep.ratios.get("global_over_norm2", float("nan"))}


def _journe_instance(seed, i):
    rng = _rng(seed, 80_000 + i)
    s1 = uniform_space(20, seed=int(rng.integers(1 << 30)))
    s2 = uniform_space(20, seed=int(rng.integers(1 << 30)))
    D1 = build_system(s1, m=0, k=2, seed=int(rng.integers(1 << 30)))
    D2 = build_system(s2, m=0, k=2, seed=int(rng.integers(1 << 30)))
    rects = []
    for _ in range(int(rng.integers(1, 6))):
        rects.append((int(rng.integers(len(D1.cubes))), int(rng.integers(len(D2.cubes)))))
    om = AdmissibleOpenSet(D1, D2, rects)
    J = bd.journe_rectangles(om)
    strict = True
    for (a, b), h in J.hat2.items():
        strict &= D2.is_ancestor(h, b) or h == b
    return {"set": i, "m1": len(J.m1), "m2": len(J.m2), "m": len(J.m),
            "covering_ratio": J.covering_ratio, "hat_contains": strict}


def run_carleson(cfg, seed, jobs=1) -> ExperimentResult:
    res = ExperimentResult("carleson", seed)
    N = cfg["N"]
    if cfg.get("measure"):
        path = cfg["measure"]
        if str(path).startswith("bundled:"):
            import json
            mu = bd.DiscreteBidiscMeasure.from_list(json.loads(read_data(path.split(":", 1)[1])))
        else:
            mu = bd.DiscreteBidiscMeasure.load(path)
        s = tuple(cfg["s"][0])
        rep = bd.carleson_report(mu, s, N, seed=seed)
        res.constants["embedding_constant"] = rep.embedding
        res.constants["t_mu_s_norm"] = rep.t_norm
        res.detail["report"] = rep.to_dict()
    # identities
    pm = bd.DiscreteBidiscMeasure.point_mass()
    res.constants["point_mass_embedding"] = bd.embedding_constant(pm, (0, 0), N)
    res.checks["point_mass_is_one"] = abs(res.constants["point_mass_embedding"] - 1) <= 1e-12
    hardy = bd.kernel_eval((0, 0), (0.5, 0), (0.5, 0), 64)
    res.constants["hardy_sum_error"] = abs(hardy - 1 / (1 - 0.25))
    res.checks["hardy_sum"] = res.constants["hardy_sum_error"] <= 1e-9
    rng = _rng(seed, 90_000)
    worst = 0.0
    for s in cfg["s"]:
        S = bd.BesovSobolevSpace(tuple(s), N)
        for _ in range(50):
            f = rng.normal(size=(N + 1, N + 1)) + 1j * rng.normal(size=(N + 1, N + 1))
            lam = 0.95 * np.sqrt(rng.random(2)) * np.exp(2j * np.pi * rng.random(2))
            err = abs(S.inner(f, S.kernel_coefficients(lam)) - S.evaluate(f, lam))
            worst = max(worst, err / math.sqrt(S.norm2(f)))
    res.constants["reproducing_error"] = worst
    res.checks["reproducing"] = worst <= 1e-9
    rows = _map(_carleson_instance, [(seed, i, N, [tuple(x) for x in cfg["s"]], cfg["points"])
                                     for i in range(cfg["measures"])], jobs)
    lr = [r["log_ratio"] for r in rows]
    res.constants.update(log_ratio_min=min(lr), log_ratio_max=max(lr), band_max=cfg["band"])
    res.checks["carleson_band"] = min(lr) >= -1e-9 and max(lr) <= cfg["band"]
    jr = _map(_journe_instance, [(seed, i) for i in range(cfg["journe_sets"])], jobs)
    res.constants["journe_max_ratio"] = max(r["covering_ratio"] for r in jr)
    res.checks["journe_covering"] = (res.constants["journe_max_ratio"] <= cfg["journe_C"]
                                     and all(r["hat_contains"] for r in jr))
    res.rows = [{"part": "measure", **r} for r in rows] + [{"part": "journe", **r} for r in jr]
    return res


# Suite constants marked "frozen" were calibrated once and are not tuned per run.
DEFAULTS = {
    "axioms": {"instances": 100, "max_points": 512, "space": ""},
    "haar": {"instances": 100, "tol": 1e-10},
    "badness": {"spaces": 10, "trials": 200, "r": [1, 2, 3], "min_passing": 9},
    "norms": {"grids": 10, "pairs": 10, "C": 2.0},
    "paraproducts": {"symbols": 30, "C": 2.0},
    "testing": {"schur_instances": 20, "schur_budget_sep": 1e-3, "schur_budget_in": 0.1,
                "t1_rectangles": 50, "t1_per_instance": 10, "t1_tol": 1e-8,
                "global_instances": 20, "family_size": 20, "band_max": 1e3,
                "surgery_instances": 4, "surgery_eps": 0.1,
                "probability_eps": [0.4, 0.2, 0.1, 0.05], "probability_trials": 40,
                "covering_seeds": 20, "theta": 1 / 33, "theta_power": 0, "upsilon": 0.1,
                "covering_points": 256},
    "carleson": {"N": 16, "s": [[0.0, 0.0], [-1.0, -1.0]], "measures": 30, "points": 40,
                 "band": math.log(2.0) + 1e-9, "journe_sets": 30, "journe_C": 2.0, "measure": ""},
}


RUNNERS = {
    "axioms": run_axioms,
    "badness": run_badness,
    "haar": run_haar,
    "norms": run_norms,
    "paraproducts": run_paraproducts,
    "testing": run_testing,
    "carleson": run_carleson,
}
