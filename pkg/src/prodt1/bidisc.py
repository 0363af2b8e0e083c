"""Besov-Sobolev spaces on the bidisc through truncated Taylor coefficients.

J_s carries the norm sum (n1+1)^s1 (n2+1)^s2 |f^(n1, n2)|^2 and the
reproducing kernel factors as K^s_lam(z) = K^s1_lam1(z1) K^s2_lam2(z2) with
K^s_lam(z) = sum_n (n+1)^-s (conj(lam) z)^n.  Everything below is exact
linear algebra at truncation degree N.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dyadic import DyadicSystem
from .errors import NotRectUnion, OutsideBidisc
from .linalg import power_norm
from .productseq import AdmissibleOpenSet, _contained_rectangles


def _check_inside(*zs):
    for z in zs:
        if np.any(np.abs(np.asarray(z)) >= 1.0):
            raise OutsideBidisc("points must satisfy |z_i| < 1")


def _weights(s: float, N: int) -> np.ndarray:
    return (np.arange(N + 1) + 1.0) ** float(s)


@dataclass(frozen=True)
class BesovSobolevSpace:
    s: tuple
    N: int

    def norm_weights(self) -> np.ndarray:
        """(N+1, N+1) array of (n1+1)^s1 (n2+1)^s2."""
        return np.outer(_weights(self.s[0], self.N), _weights(self.s[1], self.N))

    def norm2(self, coef) -> float:
        return float(np.sum(self.norm_weights() * np.abs(coef) ** 2))

    def inner(self, f, g) -> complex:
        return complex(np.sum(self.norm_weights() * f * np.conj(g)))

    def kernel_coefficients(self, lam) -> np.ndarray:
        """Taylor coefficients of j_lam."""
        _check_inside(lam)
        a = _weights(-self.s[0], self.N) * np.conj(lam[0]) ** np.arange(self.N + 1)
        b = _weights(-self.s[1], self.N) * np.conj(lam[1]) ** np.arange(self.N + 1)
        return np.outer(a, b)

    def evaluate(self, coef, z) -> complex:
        _check_inside(z)
        p = np.arange(self.N + 1)
        return complex((z[0] ** p) @ np.asarray(coef) @ (z[1] ** p))


def _factor(s: float, lam, z, N: int):
    """Elementwise K^s_lam(z) for one variable."""
    t = np.conj(np.asarray(lam, complex))[..., None] * np.asarray(z, complex)[..., None]
    return np.sum(_weights(-s, N) * t ** np.arange(N + 1), axis=-1)


def _factor_matrix(s: float, z, N: int) -> np.ndarray:
    """F[i, j] = K^s_{z_j}(z_i)."""
    z = np.asarray(z, complex)
    return _factor(s, z[None, :], z[:, None], N)


def kernel_eval(s, lam, z, N: int) -> complex:
    """K^s_lam(z) truncated at degree N in each variable."""
    _check_inside(lam, z)
    return complex(_factor(s[0], lam[0], z[0], N) * _factor(s[1], lam[1], z[1], N))


def kernel_matrix(s, z: np.ndarray, N: int) -> np.ndarray:
    """K[i, j] = K^s_{z_j}(z_i) for points z of shape (n, 2)."""
    z = np.asarray(z, complex).reshape(-1, 2)
    _check_inside(z)
    return _factor_matrix(s[0], z[:, 0], N) * _factor_matrix(s[1], z[:, 1], N)


# measures ------------------------------------------------------------------------

@dataclass
class DiscreteBidiscMeasure:
    z: np.ndarray  # (n, 2) complex
    mass: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, complex).reshape(-1, 2)
        self.mass = np.asarray(self.mass, float).reshape(-1)
        if self.z.shape[0] != self.mass.size:
            raise ValueError("points and masses differ in length")
        _check_inside(self.z)
        if np.any(self.mass < 0):
            raise ValueError("masses must be nonnegative")

    @property
    def n(self) -> int:
        return self.mass.size

    @classmethod
    def point_mass(cls, z=(0, 0), mass: float = 1.0):
        return cls(np.array([z], complex), np.array([mass]))

    def to_list(self) -> list:
        return [{"z1": [float(a.real), float(a.imag)], "z2": [float(b.real), float(b.imag)],
                 "mass": float(m)} for (a, b), m in zip(self.z, self.mass)]

    def dumps(self) -> str:
        return json.dumps(self.to_list(), indent=2)

    @classmethod
    def from_list(cls, items):
        z = np.array([[complex(*d["z1"]), complex(*d["z2"])] for d in items], complex)
        m = np.array([d["mass"] for d in items], float)
        return cls(z.reshape(-1, 2), m)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_list(json.load(fh))

    def product_factors(self, tol: float = 1e-12):
        """(z1 values, m1, z2 values, m2) when mu = mu1 x mu2 on a full grid, else None."""
        u1, i1 = np.unique(self.z[:, 0], return_inverse=True)
        u2, i2 = np.unique(self.z[:, 1], return_inverse=True)
        M = np.zeros((u1.size, u2.size))
        np.add.at(M, (i1, i2), self.mass)
        if np.any(M <= 0):
            return None
        m1 = M.sum(axis=1)
        m2 = M.sum(axis=0) / M.sum()
        if np.max(np.abs(M - np.outer(m1, m2))) > tol * M.max():
            return None
        return u1, m1, u2, m2


def random_product_measure(n1: int, n2: int, seed: int = 0, max_radius: float = 0.9):
    rng = np.random.default_rng(seed)
    z1 = max_radius * np.sqrt(rng.random(n1)) * np.exp(2j * np.pi * rng.random(n1))
    z2 = max_radius * np.sqrt(rng.random(n2)) * np.exp(2j * np.pi * rng.random(n2))
    m1 = rng.uniform(0.1, 1.0, n1)
    m2 = rng.uniform(0.1, 1.0, n2)
    Z = np.stack(np.broadcast_arrays(z1[:, None], z2[None, :]), -1).reshape(-1, 2)
    m = np.outer(m1, m2).reshape(-1)
    return DiscreteBidiscMeasure(Z, m / m.sum())


# embedding --------------------------------------------------------------------------

def embedding_constant(mu: DiscreteBidiscMeasure, s, N: int) -> float:
    """sup of int |f|^2 dmu / ||f||^2_{J_s} over polynomials of degree <= N.

    Equals the top eigenvalue of sqrt(m) K sqrt(m) with K the truncated
    kernel matrix on the support.
    """
    if mu.n == 0 or not np.any(mu.mass > 0):
        return 0.0
    K = kernel_matrix(s, mu.z, N)
    r = np.sqrt(mu.mass)
    A = r[:, None] * K * r[None, :]
    A = 0.5 * (A + A.conj().T)
    return float(max(np.linalg.eigvalsh(A)[-1], 0.0))


def embedding_constant_oracle(mu: DiscreteBidiscMeasure, s, N: int) -> float:
    """Generalized eigenproblem in coefficient space: V^H M V f = c D f."""
    from scipy.linalg import eigh
    p = np.arange(N + 1)
    V = (mu.z[:, 0][:, None] ** p)[:, :, None] * (mu.z[:, 1][:, None] ** p)[:, None, :]
    V = V.reshape(mu.n, -1)
    A = V.conj().T @ (mu.mass[:, None] * V)
    D = np.diag(BesovSobolevSpace(tuple(s), N).norm_weights().reshape(-1))
    return float(eigh(0.5 * (A + A.conj().T), D, eigvals_only=True)[-1])


def t_mu_s_matrix(mu: DiscreteBidiscMeasure, s, N: int) -> np.ndarray:
    """Re K^s_{z_i}(z_j); acts by (T f)(z_i) = sum_j M[i, j] f(z_j) m_j."""
    return kernel_matrix(s, mu.z, N).real.T.copy()


def t_mu_s_norm(mu: DiscreteBidiscMeasure, s, N: int, method: str = "power") -> float:
    r = np.sqrt(mu.mass)
    A = r[:, None] * t_mu_s_matrix(mu, s, N) * r[None, :]
    if method == "dense":
        return float(np.linalg.norm(A, 2)) if A.size else 0.0
    res = power_norm(lambda x: A @ x, lambda y: A.T @ y, A.shape[0], max_iters=5000, tol=1e-13)
    return res.value


def _product_table(mu, s, N):
    """T[x1, x2, y1, y2] = Re K^s_{y}(x) on the product grid."""
    u1, m1, u2, m2 = mu.product_factors()
    F1 = _factor_matrix(s[0], u1, N)  # F1[x, y] = K_y(x)
    F2 = _factor_matrix(s[1], u2, N)
    T = np.real(F1[:, None, :, None] * F2[None, :, None, :])
    return T, m1, m2


def global_testing_bidisc(mu: DiscreteBidiscMeasure, s, N: int, family) -> Optional[dict]:
    """max over Omega of int |S 1_Omega|^2 / mu(Omega) for S in {T, T*, T1, T1*}.

    Defined on product measures only (partial adjoints swap one variable);
    ``family`` holds boolean (n1, n2) masks over the grid.
    """
    if mu.product_factors() is None:
        return None
    T, m1, m2 = _product_table(mu, s, N)
    W = np.outer(m1, m2)
    ops = {"T": T, "T*": T.transpose(2, 3, 0, 1), "T1": T.transpose(2, 1, 0, 3),
           "T1*": T.transpose(0, 3, 2, 1)}
    out = {}
    for name, K in ops.items():
        best = 0.0
        for om in family:
            f = np.asarray(om, float)
            mO = float(np.sum(f * W))
            if mO <= 0:
                continue
            g = np.einsum("abcd,cd->ab", K, f * W)
            best = max(best, float(np.sum(g ** 2 * W)) / mO)
        out[name] = best
    return out


@dataclass
class CarlesonReport:
    embedding: float
    t_norm: float
    product_measure: bool
    global_testing: Optional[dict] = None
    ratios: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"embedding_constant": self.embedding, "t_mu_s_norm": self.t_norm,
                "product_measure": self.product_measure, "global_testing": self.global_testing,
                "ratios": self.ratios}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def random_grid_sets(n1: int, n2: int, count: int, seed: int = 0) -> list:
    """Unions of grid rectangles used as testing sets."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = np.zeros((n1, n2), bool)
        for _ in range(rng.integers(1, 4)):
            a = rng.random(n1) < rng.uniform(0.2, 0.8)
            b = rng.random(n2) < rng.uniform(0.2, 0.8)
            m |= np.outer(a, b)
        if m.any():
            out.append(m)
    return out


def carleson_report(mu: DiscreteBidiscMeasure, s, N: int, family_size: int = 20,
                    seed: int = 0) -> CarlesonReport:
    emb = embedding_constant(mu, s, N)
    tn = t_mu_s_norm(mu, s, N, method="dense")
    pf = mu.product_factors()
    gt = None
    ratios = {}
    if tn > 0 and emb > 0:
        ratios["log_embedding_over_norm"] = float(np.log(emb / tn))
    if pf is not None:
        fam = random_grid_sets(pf[0].size, pf[2].size, family_size, seed)
        gt = global_testing_bidisc(mu, s, N, fam)
        if gt and tn > 0:
            ratios["global_over_norm2"] = float(max(gt.values()) / tn ** 2)
    return CarlesonReport(emb, tn, pf is not None, gt, ratios)


# Journe rectangles ----------------------------------------------------------------

def canonical_cubes(sys: DyadicSystem) -> np.ndarray:
    """Map each cube to the coarsest cube with the same members."""
    out = np.arange(len(sys.cubes))
    for c in sorted(sys.cubes, key=lambda c: c.gen):
        p = c.parent
        if p >= 0 and sys.cubes[p].members.size == c.members.size:
            out[c.id] = out[p]
    return out


def _strict_parent(sys, canon, cid):
    """Canonical cube strictly larger than cid, or -1."""
    p = sys.cubes[canon[cid]].parent
    return -1 if p < 0 else int(canon[p])


@dataclass
class JourneResult:
    m1: list
    m2: list
    m: list
    hat2: dict  # R in m1 -> canonical cube I2-hat
    covering_sum: float
    measure: float

    @property
    def covering_ratio(self) -> float:
        return self.covering_sum / self.measure if self.measure > 0 else 0.0


def journe_rectangles(omega, sys1: DyadicSystem = None, sys2: DyadicSystem = None,
                      weight=lambda x: x ** 0.5) -> JourneResult:
    """Maximal rectangles of Omega and the enlargements I2-hat of m1(Omega)."""
    if isinstance(omega, AdmissibleOpenSet):
        sys1, sys2, mask = omega.sys1, omega.sys2, omega.mask
    else:
        mask = np.asarray(omega, bool)
        AdmissibleOpenSet.from_mask(mask, sys1, sys2, strict=True)
    inside = _contained_rectangles(mask, sys1, sys2)
    if not np.array_equal(AdmissibleOpenSet.from_mask(mask, sys1, sys2).mask, mask):
        raise NotRectUnion("mask is not a union of dyadic rectangles")
    c1, c2 = canonical_cubes(sys1), canonical_cubes(sys2)
    w1, w2 = sys1.space.weights, sys2.space.weights
    rects = sorted({(int(c1[a]), int(c2[b])) for a, b in np.argwhere(inside)})
    m1, m2, m = [], [], []
    for a, b in rects:
        pa = _strict_parent(sys1, c1, a)
        pb = _strict_parent(sys2, c2, b)
        max1 = pa < 0 or not inside[pa, b]
        max2 = pb < 0 or not inside[a, pb]
        if max1:
            m1.append((a, b))
        if max2:
            m2.append((a, b))
        if max1 and max2:
            m.append((a, b))
    hat2 = {}
    total = 0.0
    for a, b in m1:
        A = sys1.cubes[a].members
        best = b
        J = b
        while J >= 0:
            B = sys2.cubes[J].members
            full = w1[A].sum() * w2[B].sum()
            part = float(w1[A] @ mask[np.ix_(A, B)] @ w2[B])
            if full > 0 and part > 0.5 * full:
                best = J
            J = _strict_parent(sys2, c2, J)
        hat2[(a, b)] = int(best)
        muR = w1[A].sum() * w2[sys2.cubes[b].members].sum()
        total += muR * weight(sys2.ell[b] / sys2.ell[best])
    meas = float(w1 @ mask @ w2)
    return JourneResult(m1, m2, m, hat2, float(total), meas)
