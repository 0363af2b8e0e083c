"""Testing-condition evaluators for bi-parameter operators on finite spaces.

Constants reported here are the smallest values making each displayed
inequality hold over the tested family.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .dyadic import DyadicSystem, build_system
from .errors import BallTooSmall, NotAdjacentScales
from .goodness import GoodnessMask, GoodnessParams, cube_distances, trial_seed
from .haar import HaarBasis
from .kernels import ADJOINTS, KernelOperator, dense_norm
from .linalg import matrix_power_norm, spectral_norm
from .productseq import AdmissibleOpenSet, CandidateFamily, ProductFrame, bmo_prod_norm
from .space import PointSpace


# reports ----------------------------------------------------------------------

@dataclass
class Condition:
    name: str
    constant: float
    family_size: int
    budget: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.budget is None or self.constant <= self.budget

    def to_dict(self) -> dict:
        return {"name": self.name, "constant": float(self.constant),
                "family_size": int(self.family_size), "budget": self.budget,
                "pass": bool(self.passed)}


@dataclass
class TestingReport:
    conditions: list = field(default_factory=list)

    def add(self, name, constant, family_size, budget=None) -> Condition:
        c = Condition(name, float(constant), int(family_size), budget)
        self.conditions.append(c)
        return c

    def __getitem__(self, name) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def to_dict(self) -> list:
        return [c.to_dict() for c in self.conditions]

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# balls -------------------------------------------------------------------------

def ball_mask(space: PointSpace, center: int, radius: float) -> np.ndarray:
    return space.rho[center] < radius


def random_balls(space: PointSpace, count: int, seed: int = 0):
    """(center, radius) pairs with radii spread over the distance range."""
    rng = np.random.default_rng(seed)
    pos = space.rho[space.rho > 0]
    lo, hi = (float(pos.min()), float(pos.max())) if pos.size else (1.0, 1.0)
    centers = rng.integers(0, space.n, count)
    radii = np.exp(rng.uniform(np.log(lo), np.log(hi) + np.log(1.5), count))
    return [(int(c), float(r)) for c, r in zip(centers, radii)]


# weak boundedness ------------------------------------------------------------------

def _atom_sup(g_plus, g_minus, mask, w) -> float:
    """sup over mean-zero a supported in mask, ||a||_2 = 1, of |<a,g1>| + |<a,g2>|.

    |u| + |v| = max(|u + v|, |u - v|), and the sup of |<a, g>| over the
    atom subspace is the norm of the projection of g onto it.
    """
    best = 0.0
    m = mask & (w > 0)
    mB = float(w[m].sum())
    if mB <= 0:
        return 0.0
    for g in (g_plus, g_minus):
        gm = g[m]
        avg = float(np.sum(gm * w[m]) / mB)
        best = max(best, float(np.sqrt(np.sum((gm - avg) ** 2 * w[m]))))
    return best


def weak_boundedness(T: KernelOperator, pairs, Lam: float = 2.0, eps: Optional[float] = None,
                     budget: Optional[float] = None) -> TestingReport:
    """Full weak boundedness and partial weak boundedness x BMO constants.

    ``pairs`` are ((c1, r1), (c2, r2)) ball pairs.  With ``eps`` every
    indicator is replaced by the indicator of the (1 + eps) dilate.
    Optimal atoms are computed exactly by projection.
    """
    s1, s2 = T.s1, T.s2
    w1, w2 = T.w1, T.w2
    Ts = T.adjoint("T*")
    grow = 1.0 + (eps or 0.0)
    full = p1 = p2 = pt1 = pt2 = 0.0
    for (c1, r1), (c2, r2) in pairs:
        B1 = ball_mask(s1, c1, r1)
        B2 = ball_mask(s2, c2, r2)
        X1 = ball_mask(s1, c1, grow * r1).astype(float)
        X2 = ball_mask(s2, c2, grow * r2).astype(float)
        L1 = float(w1[ball_mask(s1, c1, Lam * r1)].sum())
        L2 = float(w2[ball_mask(s2, c2, Lam * r2)].sum())
        F = np.outer(X1, X2)
        TF = T.apply(F)
        TsF = Ts.apply(F)
        val = abs(float(np.sum(TF * F * np.outer(w1, w2))))
        full = max(full, val / (L1 * L2) if L1 * L2 > 0 else 0.0)
        # first factor atoms: functional g(x1) = sum_x2 TF(x1, x2) X2(x2) w2(x2)
        g = TF @ (X2 * w2)
        gs = TsF @ (X2 * w2)
        a = _atom_sup(g + gs, g - gs, B1, w1)
        den = np.sqrt(L1) * L2
        p1 = max(p1, a / den if den > 0 else 0.0)
        g = (X1 * w1) @ TF
        gs = (X1 * w1) @ TsF
        a = _atom_sup(g + gs, g - gs, B2, w2)
        den = L1 * np.sqrt(L2)
        p2 = max(p2, a / den if den > 0 else 0.0)
        if eps is not None:
            # point masses at the centres, as unweighted indicators
            v = abs(float(np.sum(TF[:, c2] * X1 * w1)) * w2[c2]) + \
                abs(float(np.sum(TsF[:, c2] * X1 * w1)) * w2[c2])
            pt1 = max(pt1, v / L1 if L1 > 0 else 0.0)
            v = abs(float(np.sum(TF[c1, :] * X2 * w2)) * w1[c1]) + \
                abs(float(np.sum(TsF[c1, :] * X2 * w2)) * w1[c1])
            pt2 = max(pt2, v / L2 if L2 > 0 else 0.0)
    rep = TestingReport()
    n = len(pairs)
    rep.add("weak_full", full, n, budget)
    rep.add("weak_bmo_1", p1, n, budget)
    rep.add("weak_bmo_2", p2, n, budget)
    if eps is not None:
        rep.add("weak_point_1", pt1, n, budget)
        rep.add("weak_point_2", pt2, n, budget)
    return rep


# T(1) pairing -------------------------------------------------------------------------

def _as_mask(space, U):
    if isinstance(U, np.ndarray) and U.dtype == bool:
        return U
    c, r = U
    return ball_mask(space, int(c), float(r))


def minimal_ball(basis: HaarBasis, row: int, C_K: float):
    """C_K B(Q) for the cube of a Haar row, as (center, radius)."""
    sys = basis.sys
    q = int(basis.row_cube[row])
    return int(sys.cubes[q].center), float(C_K * sys.C_Q * sys.ell[q])


def t1_pairing(T: KernelOperator, basis1: HaarBasis, row1: int, basis2: HaarBasis, row2: int,
               U, V, detail: bool = False):
    """<T1, h_Q1 (x) h_Q2> as A1 + A2 + A3 + A4 for balls U, V.

    A1 is the pairing of T(chi_U (x) chi_V); A2, A3 and A4 use the kernel
    with the values at the cube centres subtracted, which the cancellation
    of the Haar functions permits.
    """
    C_K = T.spec.C_K
    s1, s2 = T.s1, T.s2
    Um, Vm = _as_mask(s1, U), _as_mask(s2, V)
    for sp, basis, row, M in ((s1, basis1, row1, Um), (s2, basis2, row2, Vm)):
        c, r = minimal_ball(basis, row, C_K)
        need = ball_mask(sp, c, r)
        if np.any(need & ~M):
            raise BallTooSmall(f"ball does not contain C_K B(Q) for row {row}")
    h1, h2 = basis1.H[row1], basis2.H[row2]
    w1, w2 = T.w1, T.w2
    x1 = basis1.sys.cubes[int(basis1.row_cube[row1])].center
    x2 = basis2.sys.cubes[int(basis2.row_cube[row2])].center
    u, uc = Um.astype(float), (~Um).astype(float)
    v, vc = Vm.astype(float), (~Vm).astype(float)
    hw1, hw2 = h1 * w1, h2 * w2
    A1 = float(hw1 @ T.apply(np.outer(u, v)) @ hw2)
    G2 = T.apply(np.outer(uc, v)) @ hw2  # function of x1
    A2 = float(hw1 @ (G2 - G2[x1]))
    G3 = hw1 @ T.apply(np.outer(u, vc))  # function of x2
    A3 = float((G3 - G3[x2]) @ hw2)
    G4 = T.apply(np.outer(uc, vc))
    G4c = G4 - G4[x1][None, :] - G4[:, x2][:, None] + G4[x1, x2]
    A4 = float(hw1 @ G4c @ hw2)
    total = A1 + A2 + A3 + A4
    if detail:
        return total, (A1, A2, A3, A4)
    return total


def pairing_scale(T: KernelOperator, basis1: HaarBasis, row1: int, basis2: HaarBasis,
                  row2: int) -> float:
    """sum |h1(x1) K(x, y) h2(x2)| mu(x) mu(y), the natural size of a pairing."""
    a = np.abs(basis1.H[row1]) * T.w1
    b = np.abs(basis2.H[row2]) * T.w2
    if T.spec.is_product:
        A, B = T.factor_matrices()
        return float((a @ np.abs(A) @ T.w1) * (b @ np.abs(B) @ T.w2))
    n1, n2 = T.spec.shape
    g = (np.abs(T.matrix()) @ T.weights.ravel()).reshape(n1, n2)
    return float(a @ g @ b)


def s1_coefficients(T: KernelOperator, which: str, pf: ProductFrame, method: str = "direct"):
    """Coefficient field <S1, h_R> on the eligible rectangles, S in {T, T*, T1, T1*}."""
    S = T.adjoint(which)
    if method == "direct":
        return pf.lift(S.apply(np.ones(S.spec.shape)))
    vals = np.zeros((pf.f1.n_rows, pf.f2.n_rows))
    C_K = T.spec.C_K
    for i, r1 in enumerate(pf.f1.rows):
        U = minimal_ball(pf.f1.basis, r1, C_K)
        for j, r2 in enumerate(pf.f2.rows):
            V = minimal_ball(pf.f2.basis, r2, C_K)
            vals[i, j] = t1_pairing(S, pf.f1.basis, r1, pf.f2.basis, r2, U, V)
    return pf.coefficients(vals)


def s1_bmo_norm(T: KernelOperator, which: str, pf: ProductFrame,
                family: Optional[CandidateFamily] = None, method: str = "direct") -> float:
    return bmo_prod_norm(s1_coefficients(T, which, pf, method), pf, family)


# global testing ---------------------------------------------------------------------

def _mask_of(om):
    return om.mask if isinstance(om, AdmissibleOpenSet) else np.asarray(om, bool)


def global_testing(T: KernelOperator, family, budget: Optional[float] = None,
                   operators=ADJOINTS) -> TestingReport:
    """max over Omega of int |S(1_Omega)|^2 / mu(Omega) for each S."""
    rep = TestingReport()
    W = T.weights
    for which in operators:
        S = T.adjoint(which)
        best = 0.0
        for om in family:
            m = _mask_of(om).astype(float)
            mu = float(np.sum(m * W))
            if mu <= 0:
                continue
            best = max(best, float(np.sum(S.apply(m) ** 2 * W)) / mu)
        rep.add(f"global_{which}", best, len(family), budget)
    return rep


def cauchy_schwarz_check(T: KernelOperator, family, norm: Optional[float] = None,
                         rtol: float = 1e-12) -> tuple:
    """Every Omega: int |T 1_Omega|^2 <= ||T||^2 mu(Omega).  Returns (ok, worst ratio)."""
    nrm = dense_norm(T) if norm is None else norm
    W = T.weights
    worst = 0.0
    for om in family:
        m = _mask_of(om).astype(float)
        mu = float(np.sum(m * W))
        lhs = float(np.sum(T.apply(m) ** 2 * W))
        if mu > 0 and nrm > 0:
            worst = max(worst, lhs / (nrm ** 2 * mu))
        elif lhs > 0:
            worst = float("inf")
    return worst <= 1.0 + rtol, worst


# Schur matrices --------------------------------------------------------------------

@dataclass
class SchurResult:
    A_sep: np.ndarray
    A_in: np.ndarray
    sep_norm: float
    in_norm: float
    sep_svd: float
    in_svd: float
    rows: np.ndarray
    cols: np.ndarray


def _sup_lambda(sys: DyadicSystem, dom, dist) -> np.ndarray:
    out = np.empty_like(dist)
    for c in sys.cubes:
        out[c.id] = np.max(dom(c.members[:, None], dist[c.id][None, :]), axis=0)
    return out


def schur_matrices(sysD: DyadicSystem, sysDp: DyadicSystem, dom, alpha: float,
                   params: GoodnessParams, good: Optional[GoodnessMask] = None,
                   max_iters: int = 2000, tol: float = 1e-12) -> SchurResult:
    """A^sep over separated pairs and A^in over nested pairs (rows D, columns D').

    Only positive-mass cubes of generations [m, k) index the matrices.  The
    separation threshold is C l(Q)^gamma l(Q')^(1-gamma) with C = 2 A0 C_Q C_K.
    """
    d_in, _ = cube_distances(sysD, sysDp)
    rows = np.flatnonzero((sysD.gen_of < sysD.k) & (sysD.mass > 0))
    cols = np.flatnonzero((sysDp.gen_of < sysDp.k) & (sysDp.mass > 0))
    if good is not None:
        rows = rows[good.good[rows]]
    dist = d_in[np.ix_(rows, cols)]
    er, ec = sysD.ell[rows], sysDp.ell[cols]
    thr = params.threshold(er[:, None], ec[None, :], sysD.delta, with_delta=False)
    with np.errstate(divide="ignore"):
        lam_full = _sup_lambda(sysD, dom, np.where(d_in > 0, d_in, np.inf))
    lam = lam_full[np.ix_(rows, cols)]
    A_sep = _backend.schur_sep(dist, er, ec, sysD.mass[rows], sysDp.mass[cols], lam,
                               float(alpha), np.ascontiguousarray(thr))
    A_in = np.zeros_like(dist)
    delta_r = sysD.delta ** params.r
    for i, q in enumerate(rows):
        Q = sysD.cubes[q]
        for j, qp in enumerate(cols):
            if not (er[i] < delta_r * ec[j] * (1 - 1e-12) and dist[i, j] <= thr[i, j]):
                continue
            lab = sysDp.label[sysDp.cubes[qp].gen + 1][Q.members] \
                if sysDp.cubes[qp].gen + 1 in sysDp.label else None
            if lab is None or np.any(lab != lab[0]) or sysDp.cubes[lab[0]].parent != qp:
                continue
            mchild = sysDp.mass[lab[0]]
            if mchild > 0:
                A_in[i, j] = (er[i] / ec[j]) ** (alpha / 2) * np.sqrt(sysD.mass[q] / mchild)
    ps = matrix_power_norm(A_sep, max_iters, tol).value if A_sep.size else 0.0
    pi = matrix_power_norm(A_in, max_iters, tol).value if A_in.size else 0.0
    return SchurResult(A_sep, A_in, ps, pi, spectral_norm(A_sep), spectral_norm(A_in), rows, cols)


# surgery ------------------------------------------------------------------------------

@dataclass
class SurgerySets:
    Delta: np.ndarray
    delta_Q: np.ndarray
    delta_Qp: np.ndarray
    Q_b: np.ndarray
    Qp_b: np.ndarray
    Q_s: np.ndarray
    Qp_s: np.ndarray
    Q_d: np.ndarray
    Qp_d: np.ndarray
    Delta_t: np.ndarray
    Q: np.ndarray
    Qp: np.ndarray

    def decomposition_ok(self) -> bool:
        q = self.Q_s.astype(int) + self.Q_d.astype(int) + self.Delta.astype(int)
        qp = self.Qp_s.astype(int) + self.Qp_d.astype(int) + self.Delta.astype(int)
        return bool(np.array_equal(q, self.Q.astype(int)) and np.array_equal(qp, self.Qp.astype(int)))

    def inclusions_ok(self) -> bool:
        a = np.all(~self.Q_d | self.delta_Qp) and np.all(~(self.delta_Qp & self.Q) | self.Q_b)
        b = np.all(~self.Qp_d | self.delta_Q) and np.all(~(self.delta_Q & self.Qp) | self.Qp_b)
        return bool(a and b)


def boundary_band(space: PointSpace, members: np.ndarray, width: float) -> np.ndarray:
    """{x : rho(x, Q) <= width and rho(x, X \\ Q) <= width}."""
    rho = space.rho
    inQ = np.zeros(space.n, bool)
    inQ[members] = True
    d_in = rho[:, inQ].min(axis=1) if inQ.any() else np.full(space.n, np.inf)
    d_out = rho[:, ~inQ].min(axis=1) if (~inQ).any() else np.full(space.n, np.inf)
    return (d_in <= width) & (d_out <= width)


def surgery(sysD: DyadicSystem, q: int, sysDp: DyadicSystem, qp: int, eps: float,
            r: int) -> SurgerySets:
    sp = sysD.space
    l, lp = sysD.ell[q], sysDp.ell[qp]
    dr = sysD.delta ** r
    if not (dr * lp <= l * (1 + 1e-12) and l <= lp * (1 + 1e-12)):
        raise NotAdjacentScales(f"l(Q)={l}, l(Q')={lp}, r={r}")
    Q = np.zeros(sp.n, bool)
    Q[sysD.cubes[q].members] = True
    Qp = np.zeros(sp.n, bool)
    Qp[sysDp.cubes[qp].members] = True
    Delta = Q & Qp
    dQ = boundary_band(sp, sysD.cubes[q].members, eps * l)
    dQp = boundary_band(sp, sysDp.cubes[qp].members, eps * lp)
    Q_b = np.zeros(sp.n, bool)
    for c in sysDp.cubes:
        lc = sysDp.ell[c.id]
        if dr * lc <= l * (1 + 1e-12) and l <= lc * (1 + 1e-12):
            Q_b |= boundary_band(sp, c.members, eps * lc)
    Q_b &= Q
    Qp_b = np.zeros(sp.n, bool)
    for c in sysD.cubes:
        lc = sysD.ell[c.id]
        if dr * lp <= lc * (1 + 1e-12) and lc <= lp * (1 + 1e-12):
            Qp_b |= boundary_band(sp, c.members, eps * lc)
    Qp_b &= Qp
    Q_s = Q & ~(Delta | dQp)
    Qp_s = Qp & ~(Delta | dQ)
    Q_d = Q & ~(Delta | Q_s)
    Qp_d = Qp & ~(Delta | Qp_s)
    Delta_t = Delta & ~(dQ | dQp)
    return SurgerySets(Delta, dQ, dQp, Q_b, Qp_b, Q_s, Qp_s, Q_d, Qp_d, Delta_t, Q, Qp)


def _own_boundary_distance(sys: DyadicSystem) -> dict:
    """gen -> rho(x, X \\ Q_gen(x)) for every point x."""
    rho = sys.space.rho
    out = {}
    for g in sys.generations:
        lab = sys.label[g]
        other = lab[:, None] != lab[None, :]
        out[g] = np.where(other, rho, np.inf).min(axis=1)
    return out


@dataclass
class SurgeryProbability:
    eps: np.ndarray
    per_point: np.ndarray  # (len(eps), n): P(x in delta_Q(x)) averaged over generations
    mean: np.ndarray
    stderr: np.ndarray

    def nonincreasing(self, k: float = 2.0) -> bool:
        """Probability does not grow as eps shrinks (within k standard errors)."""
        order = np.argsort(-self.eps)
        m, s = self.mean[order], self.stderr[order]
        return bool(np.all(m[1:] <= m[:-1] + k * np.hypot(s[1:], s[:-1]) + 1e-15))


def surgery_probability(space: PointSpace, delta: float, m: int, k: int, eps_values,
                        trials: int, seed: int) -> SurgeryProbability:
    """Empirical P(x in delta_Q) over random grids, sharing grids across eps."""
    eps = np.asarray(list(eps_values), float)
    hits = np.zeros((eps.size, trials, space.n))
    for t in range(trials):
        sys = build_system(space, delta, m, k, seed=trial_seed(seed, t))
        dist = _own_boundary_distance(sys)
        for g, d in dist.items():
            ell = delta ** g
            for e_i, e in enumerate(eps):
                hits[e_i, t] += d <= e * ell
        hits[:, t] /= max(len(dist), 1)
    per_point = hits.mean(axis=1)
    per_trial = hits.mean(axis=2)
    mean = per_trial.mean(axis=1)
    se = per_trial.std(axis=1, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(eps.size)
    return SurgeryProbability(eps, per_point, mean, se)


# random ball coverings -----------------------------------------------------------------

@dataclass
class BallCovering:
    centers: np.ndarray
    radii: np.ndarray
    members: list
    c: float
    C: float
    scale: float
    coverage: float
    seed: int
    attempts: int
    reached: bool

    def separation_ok(self, space: PointSpace) -> bool:
        s = self.c * self.scale
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                if space.rho[np.ix_(self.members[i], self.members[j])].min() < s:
                    return False
        return True

    def radii_ok(self) -> bool:
        lo, hi = self.c * self.scale, self.C * self.scale
        return bool(np.all((self.radii >= lo * (1 - 1e-12)) & (self.radii <= hi * (1 + 1e-12))))


def _one_covering(space, scale, c, C, rng):
    n = space.n
    rho = space.rho
    s = c * scale
    dc = np.full(n, np.inf)  # distance to the union of balls so far
    covered = np.zeros(n, bool)
    centers, radii, members = [], [], []
    for x in rng.permutation(n):
        if covered[x] or dc[x] < s:
            continue
        r = rng.uniform(0.5 * C * scale, C * scale)
        close = dc < s
        if np.any(close):
            r = min(r, float(rho[x, close].min()))
        if r < s:
            continue
        mem = np.flatnonzero(rho[x] < r)
        centers.append(int(x))
        radii.append(float(r))
        members.append(mem)
        covered[mem] = True
        dc = np.minimum(dc, rho[:, mem].min(axis=1))
    w = space.weights
    cov = float(w[covered].sum() / w.sum()) if w.sum() > 0 else 1.0
    return centers, radii, members, cov


def ball_covering(space: PointSpace, theta: float, k: int, upsilon: float, seed: int = 0,
                  c: Optional[float] = None, C: float = 0.5, max_retries: int = 20) -> BallCovering:
    """Disjoint balls with radii in [c theta^k, C theta^k], pairwise separated by c theta^k.

    Retries with derived seeds until the covered mass fraction reaches
    1 - upsilon; ``reached`` is False when ``max_retries`` ran out.
    """
    A0 = space.A0
    if not (0 < theta < A0 ** -4 / 32):
        raise ValueError("need 0 < theta < A0^-4 / 32")
    c = upsilon * C / 8.0 if c is None else c
    if not (0 < c <= C < 1):
        raise ValueError("need 0 < c <= C < 1")
    scale = theta ** k
    best = None
    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), attempt]))
        out = _one_covering(space, scale, c, C, rng)
        if best is None or out[3] > best[0][3]:
            best = (out, attempt)
        if out[3] >= 1 - upsilon:
            break
    (centers, radii, members, cov), attempt = best
    return BallCovering(np.array(centers, int), np.array(radii), members, c, C, scale, cov,
                        seed, attempt + 1, cov >= 1 - upsilon)
