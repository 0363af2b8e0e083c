"""One-parameter, full and mixed paraproducts, with norm and Carleson-box checks.

Every paraproduct here has the shape

    Pi w = sum_{i, j} b_ij  <w, L1_i (x) L2_j>_mu  O1_i (x) O2_j

where ``L`` rows are input functionals (applied against ``w * mu``) and ``O``
rows are output functions, one pair per eligible Haar row of a
:class:`~prodt1.goodness.Frame`.  A one-parameter paraproduct has one leg.
The exact L2(mu) norm is computed as ``||G_O^(1/2) diag(b) G_I^(1/2)||``
with ``G_O = O mu O^T`` and ``G_I = L mu L^T``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dyadic import DyadicSystem
from .goodness import Frame
from .linalg import matrix_power_norm, power_norm, psd_sqrt, spectral_norm
from .productseq import CandidateFamily, ProductFrame, bmo_prod_norm, l2_norm


@dataclass
class Leg:
    L: np.ndarray  # (rows, n) input functionals, paired with f * mu
    O: np.ndarray  # (rows, n) output functions
    w: np.ndarray  # weights of the factor

    @property
    def rows(self) -> int:
        return self.L.shape[0]

    @property
    def n(self) -> int:
        return self.w.size

    def gram_in(self):
        return (self.L * self.w) @ self.L.T

    def gram_out(self):
        return (self.O * self.w) @ self.O.T


def _cube_average_rows(frame: Frame) -> np.ndarray:
    sys = frame.sys
    cubes = frame.cube_of_row()
    ind = sys.indicator[cubes]
    m = sys.mass[cubes]
    inv = np.where(m > 0, 1.0 / np.where(m > 0, m, 1.0), 0.0)
    return ind * inv[:, None]


def leg_average_to_haar(frame: Frame, average: str = "container") -> Leg:
    """Input <w>_{S(Q)} (or <w>_Q), output h_Q."""
    L = frame.E if average == "container" else _cube_average_rows(frame)
    return Leg(L, frame.H, frame.space.weights)


def leg_haar_to_average(frame: Frame) -> Leg:
    """Input <w, h_Q>, output chi_{S(Q)} / mu(S(Q))."""
    return Leg(frame.H, frame.E, frame.space.weights)


def _u_mask(frame: Frame, u) -> np.ndarray:
    if u is None:
        return np.ones(frame.n_rows, dtype=bool)
    return frame.basis.row_u[frame.rows] == int(u)


class Paraproduct:
    def __init__(self, legs: Sequence[Leg], coef: np.ndarray, kind: str = ""):
        self.legs = list(legs)
        self.coef = np.asarray(coef, float)
        self.kind = kind
        if len(self.legs) not in (1, 2):
            raise ValueError("one or two legs")
        if self.coef.shape != tuple(l.rows for l in self.legs):
            raise ValueError("coefficient shape does not match legs")

    @property
    def shape(self):
        return tuple(l.n for l in self.legs)

    @property
    def weights(self):
        if len(self.legs) == 1:
            return self.legs[0].w
        return np.outer(self.legs[0].w, self.legs[1].w)

    def apply(self, w) -> np.ndarray:
        w = np.asarray(w, float)
        if len(self.legs) == 1:
            (g,) = self.legs
            return g.O.T @ (self.coef * (g.L @ (w * g.w)))
        g1, g2 = self.legs
        X = (g1.L * g1.w) @ w @ (g2.L * g2.w).T
        return g1.O.T @ (self.coef * X) @ g2.O

    def adjoint_apply(self, v) -> np.ndarray:
        v = np.asarray(v, float)
        if len(self.legs) == 1:
            (g,) = self.legs
            return g.L.T @ (self.coef * (g.O @ (v * g.w)))
        g1, g2 = self.legs
        Y = (g1.O * g1.w) @ v @ (g2.O * g2.w).T
        return g1.L.T @ (self.coef * Y) @ g2.L

    def bilinear(self, w, v) -> float:
        return float(np.sum(self.apply(w) * np.asarray(v, float) * self.weights))

    def matrix(self) -> np.ndarray:
        """Pointwise matrix M with (Pi w).ravel() = M @ w.ravel()."""
        if len(self.legs) == 1:
            (g,) = self.legs
            return g.O.T @ (self.coef[:, None] * (g.L * g.w))
        g1, g2 = self.legs
        A = np.einsum("ij,jb,jd->ibd", self.coef, g2.O, g2.L * g2.w)
        M = np.einsum("ia,ic,ibd->abcd", g1.O, g1.L * g1.w, A)
        return M.reshape(g1.n * g2.n, g1.n * g2.n)

    def _factored(self):
        so = [psd_sqrt(g.gram_out()) for g in self.legs]
        si = [psd_sqrt(g.gram_in()) for g in self.legs]
        return so, si

    def norm(self, dense_limit: int = 2500) -> float:
        """Exact L2(mu) operator norm."""
        if not np.any(self.coef):
            return 0.0
        so, si = self._factored()
        if len(self.legs) == 1:
            return spectral_norm(so[0] @ (self.coef[:, None] * si[0]))
        r1, r2 = self.coef.shape
        b = self.coef
        if r1 * r2 <= dense_limit:
            A = np.einsum("ip,jq,pq,pk,ql->ijkl", so[0], so[1], b, si[0], si[1])
            return spectral_norm(A.reshape(r1 * r2, r1 * r2))
        mv = lambda x: (so[0] @ (b * (si[0] @ x.reshape(r1, r2) @ si[1].T)) @ so[1].T).ravel()
        rmv = lambda y: (si[0].T @ (b * (so[0].T @ y.reshape(r1, r2) @ so[1])) @ si[1]).ravel()
        return power_norm(mv, rmv, r1 * r2, max_iters=2000, tol=1e-12).value

    def power_norm(self, max_iters: int = 1000, tol: float = 1e-10, seed: int = 0) -> float:
        """Power iteration on the assembled weighted pointwise matrix."""
        w = self.weights.ravel()
        s = np.sqrt(w)
        pos = s > 0
        M = self.matrix()[np.ix_(pos, pos)]
        A = s[pos][:, None] * M / s[pos][None, :]
        return matrix_power_norm(A, max_iters, tol, seed).value

    def sample_norm(self, samples) -> float:
        best = 0.0
        w = self.weights
        for f in samples:
            d = float(np.sqrt(np.sum(np.asarray(f) ** 2 * w)))
            if d > 0:
                best = max(best, float(np.sqrt(np.sum(self.apply(f) ** 2 * w))) / d)
        return best


# constructors ----------------------------------------------------------------

def haar_coefficients(a, frame: Frame) -> np.ndarray:
    return frame.H @ (np.asarray(a, float) * frame.space.weights)


def pi_one(a, frame: Frame, u=None) -> Paraproduct:
    """Pi_a omega = sum <omega>_{S(Q)} <a, h_Q> h_Q over eligible rows with index u."""
    coef = haar_coefficients(a, frame) * _u_mask(frame, u)
    return Paraproduct([leg_average_to_haar(frame)], coef, "one")


def _product_coef(b, f1: Frame, f2: Frame, u1, u2) -> np.ndarray:
    b = np.asarray(b, float)
    c = (f1.H * f1.space.weights) @ b @ (f2.H * f2.space.weights).T
    return c * np.outer(_u_mask(f1, u1), _u_mask(f2, u2))


def pi_full(b, frame1: Frame, frame2: Frame, u1=None, u2=None,
            average: str = "container") -> Paraproduct:
    """Pi_b w = sum <w>_{S(Q1) x S(Q2)} <b, h_Q1 (x) h_Q2> h_Q1 (x) h_Q2.

    ``average="cube"`` averages over Q1 x Q2 instead of the containers.
    """
    coef = _product_coef(b, frame1, frame2, u1, u2)
    legs = [leg_average_to_haar(frame1, average), leg_average_to_haar(frame2, average)]
    return Paraproduct(legs, coef, "full")


def pi_mixed(b, frame1: Frame, frame2_swapped: Frame, u1=None, u2=None) -> Paraproduct:
    """Mixed paraproduct.

    Factor 1 reads ``<w, h_Q1>`` and writes ``chi_{S(Q1)}/mu(S(Q1))``; factor 2
    uses a frame whose small grid is the second primed grid and whose
    containers come from the unprimed one, reading the container average and
    writing ``h_{Q'2}``.
    """
    coef = _product_coef(b, frame1, frame2_swapped, u1, u2)
    legs = [leg_haar_to_average(frame1), leg_average_to_haar(frame2_swapped)]
    return Paraproduct(legs, coef, "mixed")


def naive_pi_one(a, omega, frame: Frame, u=None) -> np.ndarray:
    """Double loop over containers and their eligible descendants."""
    sys2 = frame.sys
    w = frame.space.weights
    cont = frame.container
    out = np.zeros(frame.space.n)
    for Qp in cont.cubes:
        mp = cont.mass[Qp.id]
        if mp <= 0:
            continue
        avg = float(np.sum(omega[Qp.members] * w[Qp.members]) / mp)
        for i, row in enumerate(frame.rows):
            if frame.container_of_row[i] != Qp.id:
                continue
            if u is not None and frame.basis.row_u[row] != u:
                continue
            h = frame.basis.H[row]
            out += avg * float(np.sum(a * h * w)) * h
    return out


# BMO_M^2 ---------------------------------------------------------------------

def ball_family(systems: Sequence[DyadicSystem], M: float):
    """Sandwich balls of every cube and their M-dilates, as (center, radius)."""
    seen = set()
    out = []
    for sys in systems:
        for c in sys.cubes:
            for r in (sys.C_Q * sys.ell[c.id], M * sys.C_Q * sys.ell[c.id]):
                key = (c.center, float(r))
                if key not in seen:
                    seen.add(key)
                    out.append(key)
    return out


def bmo_m2_norm(a, space, balls, M: float) -> float:
    """max over balls of ||(a - <a>_B) chi_B||_2 / mu(MB)^(1/2); exact best constant b_B."""
    a = np.asarray(a, float)
    w = space.weights
    rho = space.rho
    best = 0.0
    for center, r in balls:
        inB = rho[center] < r
        mB = float(w[inB].sum())
        if mB <= 0:
            continue
        avg = float(np.sum(a[inB] * w[inB]) / mB)
        num = float(np.sum((a[inB] - avg) ** 2 * w[inB]))
        den = float(w[rho[center] < M * r].sum())
        best = max(best, num / den)
    return float(np.sqrt(best))


# Carleson boxes ---------------------------------------------------------------

@dataclass
class CarlesonBoxData:
    alpha: np.ndarray  # per cube of the container grid
    box: np.ndarray  # sum_{Q subset Q'} alpha_Q mu(Q), per cube Q'
    mass: np.ndarray

    def box_constant(self, norm_sq: float) -> float:
        """Smallest C with box <= C mu(Q') norm_sq for every Q'."""
        pos = self.mass > 0
        if not np.any(pos) or not np.any(self.box[pos] > 0):
            return 0.0
        if norm_sq <= 0:
            return float("inf")
        return float(np.max(self.box[pos] / self.mass[pos]) / norm_sq)

    def embedding_bound(self) -> float:
        """Dyadic Carleson embedding: ||Pi|| <= 2 (sup box/mu)^(1/2)."""
        pos = self.mass > 0
        if not np.any(pos):
            return 0.0
        return 2.0 * float(np.sqrt(np.max(self.box[pos] / self.mass[pos])))


def carleson_boxes(coef, frame: Frame) -> CarlesonBoxData:
    cont = frame.container
    e = np.zeros(len(cont.cubes))
    np.add.at(e, frame.container_of_row, np.asarray(coef, float) ** 2)
    mass = cont.mass
    alpha = np.where(mass > 0, e / np.where(mass > 0, mass, 1.0), 0.0)
    box = e.copy()
    # accumulate from the finest generation upward
    for g in sorted(cont.levels, reverse=True):
        for cid in cont.levels[g]:
            p = cont.cubes[cid].parent
            if p >= 0:
                box[p] += box[cid]
    return CarlesonBoxData(alpha, box, mass)


# checks ----------------------------------------------------------------------

def _ratio(num, den):
    if num <= 1e-14 and den <= 1e-14:
        return 0.0
    return float(num / den) if den > 0 else float("inf")


def pi_one_norm_check(a, frame: Frame, samples=(), M: Optional[float] = None, u=None) -> dict:
    M = float(M if M is not None else 2.0)
    P = pi_one(a, frame, u)
    balls = ball_family([frame.sys, frame.container], M)
    bmo = bmo_m2_norm(a, frame.space, balls, M)
    op = P.norm()
    boxes = carleson_boxes(P.coef, frame)
    return {
        "operator_norm": op,
        "sample_norm": P.sample_norm(samples),
        "bmo": bmo,
        "ratio": _ratio(op, bmo),
        "box_constant": boxes.box_constant(bmo ** 2),
        "embedding_bound": boxes.embedding_bound(),
        "embedding_ok": op <= boxes.embedding_bound() * (1 + 1e-9) + 1e-12,
    }


def pi_full_norm_check(b, frame1: Frame, frame2: Frame, samples=(), family=None,
                       u1=None, u2=None, average: str = "container") -> dict:
    P = pi_full(b, frame1, frame2, u1, u2, average)
    pf = ProductFrame(frame1, frame2)
    bmo = bmo_prod_norm(pf.coefficients(P.coef), pf, family)
    op = P.norm()
    return {"operator_norm": op, "sample_norm": P.sample_norm(samples), "bmo": bmo,
            "ratio": _ratio(op, bmo)}


def pi_mixed_bound_check(b, frame1: Frame, frame2_swapped: Frame, pairs=(), family=None,
                         u1=None, u2=None) -> dict:
    P = pi_mixed(b, frame1, frame2_swapped, u1, u2)
    pf = ProductFrame(frame1, frame2_swapped)
    bmo = bmo_prod_norm(pf.coefficients(P.coef), pf, family)
    op = P.norm()
    w = P.weights
    worst = 0.0
    for f, g in pairs:
        nf = float(np.sqrt(np.sum(f * f * w)))
        ng = float(np.sqrt(np.sum(g * g * w)))
        if nf > 0 and ng > 0:
            worst = max(worst, abs(P.bilinear(f, g)) / (nf * ng))
    return {"operator_norm": op, "bilinear_max": worst, "bmo": bmo, "ratio": _ratio(op, bmo)}


# export ----------------------------------------------------------------------

def export_matrix(M, path, meta: Optional[dict] = None) -> tuple:
    """Write ``path.bin`` (row-major little-endian float64) and ``path.json`` header."""
    M = np.ascontiguousarray(np.asarray(M, dtype="<f8"))
    path = Path(path)
    binp = path.with_suffix(".bin")
    hdr = path.with_suffix(".json")
    binp.write_bytes(M.tobytes(order="C"))
    header = {"shape": list(M.shape), "dtype": "float64", "byteorder": "little",
              "order": "row-major", "file": binp.name}
    header.update(meta or {})
    hdr.write_text(json.dumps(header, indent=2, sort_keys=True))
    return binp, hdr


def import_matrix(path) -> np.ndarray:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    return data.reshape(header["shape"]).copy()
