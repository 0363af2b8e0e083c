"""Haar functions adapted to a dyadic system and one-parameter expansions.

Children of a cube are ordered by decreasing mass (ties by cube id).  With
``Q_1, ..., Q_M`` the positive-mass children and ``Qhat_u`` the union of
``Q_u, ..., Q_M``::

    h_0 = mu(Q)^(-1/2) chi_Q
    h_u = a_u chi_{Q_u} - b_u chi_{Qhat_{u+1}},     u = 1, ..., M-1
    a_u = mu(Qhat_{u+1})^(1/2) / (mu(Q_u)^(1/2) mu(Qhat_u)^(1/2))
    b_u = mu(Q_u)^(1/2) / (mu(Qhat_u)^(1/2) mu(Qhat_{u+1})^(1/2))

Zero-mass children are skipped, so every stored function has unit norm.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dyadic import DyadicSystem
from .errors import UnknownIndex


class HaarBasis:
    def __init__(self, sys: DyadicSystem):
        self.sys = sys
        sp = sys.space
        w = sp.weights
        mass = sys.mass
        rows_cube, rows_u, vecs = [], [], []
        self.child_order = {}
        self.coef = {}  # (cube, u) -> (a_u, b_u)
        self.zero_mass_cubes = []
        n = sp.n
        for c in sys.cubes:
            mQ = mass[c.id]
            if mQ <= 0:
                self.zero_mass_cubes.append(c.id)
                continue
            v = np.zeros(n)
            v[c.members] = mQ ** -0.5
            rows_cube.append(c.id)
            rows_u.append(0)
            vecs.append(v)
            if c.gen >= sys.k or not c.children:
                continue
            kids = sorted(c.children, key=lambda q: (-mass[q], q))
            kids = [q for q in kids if mass[q] > 0]
            self.child_order[c.id] = kids
            km = np.array([mass[q] for q in kids])
            tail = np.cumsum(km[::-1])[::-1]  # mu(Qhat_u), u = 1..M
            for u in range(1, len(kids)):
                mu_u, hat_u, hat_next = km[u - 1], tail[u - 1], tail[u]
                a = np.sqrt(hat_next) / (np.sqrt(mu_u) * np.sqrt(hat_u))
                b = np.sqrt(mu_u) / (np.sqrt(hat_u) * np.sqrt(hat_next))
                v = np.zeros(n)
                v[sys.cubes[kids[u - 1]].members] = a
                for q in kids[u:]:
                    v[sys.cubes[q].members] = -b
                rows_cube.append(c.id)
                rows_u.append(u)
                vecs.append(v)
                self.coef[(c.id, u)] = (a, b)
        self.row_cube = np.array(rows_cube, dtype=np.int64)
        self.row_u = np.array(rows_u, dtype=np.int64)
        self.row_gen = sys.gen_of[self.row_cube] if len(rows_cube) else np.zeros(0, np.int64)
        self.H = np.array(vecs) if vecs else np.zeros((0, n))
        self.row_index = {(int(c), int(u)): i for i, (c, u) in enumerate(zip(rows_cube, rows_u))}
        self.weights = w

    @property
    def space(self):
        return self.sys.space

    def __len__(self):
        return self.H.shape[0]

    def function(self, cube: int, u: int) -> np.ndarray:
        i = self.row_index.get((cube, u))
        if i is None:
            return np.zeros(self.space.n)
        return self.H[i]

    def select(self, gens=None, u_min: int = 1) -> np.ndarray:
        """Row indices with u >= u_min and generation in ``gens``."""
        keep = self.row_u >= u_min
        if gens is not None:
            keep &= np.isin(self.row_gen, np.asarray(list(gens)))
        return np.flatnonzero(keep)

    def expansion_rows(self, m: Optional[int] = None, k: Optional[int] = None) -> np.ndarray:
        m = self.sys.m if m is None else m
        k = self.sys.k if k is None else k
        cancel = (self.row_u >= 1) & (self.row_gen >= m) & (self.row_gen < k)
        top = (self.row_u == 0) & (self.row_gen == m)
        return np.flatnonzero(cancel | top)

    def gram(self, rows=None) -> np.ndarray:
        H = self.H if rows is None else self.H[rows]
        return (H * self.weights) @ H.T


@dataclass
class CoefficientField:
    basis: HaarBasis
    rows: np.ndarray
    values: np.ndarray

    def items(self):
        b = self.basis
        for r, v in zip(self.rows, self.values):
            yield (int(b.row_cube[r]), int(b.row_u[r])), float(v)

    def as_dict(self) -> dict:
        return dict(self.items())

    def get(self, cube, u, default=0.0):
        i = self.basis.row_index.get((cube, u))
        if i is None:
            return default
        hit = np.flatnonzero(self.rows == i)
        return float(self.values[hit[0]]) if hit.size else default

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))

    def to_csv(self, path):
        b = self.basis
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["generation", "cube_id", "u", "value"])
            for r, v in zip(self.rows, self.values):
                wr.writerow([int(b.row_gen[r]), int(b.row_cube[r]), int(b.row_u[r]), f"{v:.12g}"])

    @classmethod
    def from_dict(cls, basis: HaarBasis, d: dict) -> "CoefficientField":
        rows, vals = [], []
        for key, v in d.items():
            i = basis.row_index.get(tuple(int(x) for x in key))
            if i is None:
                raise UnknownIndex(key)
            rows.append(i)
            vals.append(v)
        return cls(basis, np.array(rows, dtype=np.int64), np.array(vals, dtype=float))


def build_haar(sys: DyadicSystem, space=None) -> HaarBasis:
    if space is not None and space is not sys.space:
        raise ValueError("system was built over a different space")
    return HaarBasis(sys)


def expand(f, basis: HaarBasis, m: Optional[int] = None, k: Optional[int] = None) -> CoefficientField:
    rows = basis.expansion_rows(m, k)
    f = np.asarray(f, dtype=float)
    vals = basis.H[rows] @ (basis.weights * f)
    return CoefficientField(basis, rows, vals)


def reconstruct(c: CoefficientField, basis: Optional[HaarBasis] = None) -> np.ndarray:
    basis = c.basis if basis is None else basis
    if basis is not c.basis:
        d = c.as_dict()
        c = CoefficientField.from_dict(basis, d)
    if c.rows.size == 0:
        return np.zeros(basis.space.n)
    if np.any((c.rows < 0) | (c.rows >= len(basis))):
        raise UnknownIndex("row out of range")
    return c.values @ basis.H[c.rows]


class ProductCoefficients:
    """Two-parameter coefficient field indexed by (basis1 row, basis2 row).

    ``values[i, j]`` is the coefficient of ``h_{rows1[i]} (x) h_{rows2[j]}``.
    """

    def __init__(self, basis1: HaarBasis, rows1, basis2: HaarBasis, rows2, values):
        self.basis1 = basis1
        self.basis2 = basis2
        self.rows1 = np.asarray(rows1, dtype=np.int64)
        self.rows2 = np.asarray(rows2, dtype=np.int64)
        self.values = np.asarray(values, dtype=float).reshape(self.rows1.size, self.rows2.size)

    def like(self, values) -> "ProductCoefficients":
        return ProductCoefficients(self.basis1, self.rows1, self.basis2, self.rows2, values)

    def items(self):
        b1, b2 = self.basis1, self.basis2
        for i, j in zip(*np.nonzero(self.values)):
            r1, r2 = self.rows1[i], self.rows2[j]
            yield ((int(b1.row_cube[r1]), int(b1.row_u[r1]), int(b2.row_cube[r2]),
                    int(b2.row_u[r2])), float(self.values[i, j]))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))

    def synthesize(self) -> np.ndarray:
        """The function sum c_R h_R as an (n1, n2) array."""
        return self.basis1.H[self.rows1].T @ self.values @ self.basis2.H[self.rows2]


def expand2(F, basis1: HaarBasis, rows1, basis2: HaarBasis, rows2) -> ProductCoefficients:
    """Coefficients <F, h_i (x) h_j> for the given rows of both bases."""
    F = np.asarray(F, dtype=float)
    A = basis1.H[rows1] * basis1.weights
    B = basis2.H[rows2] * basis2.weights
    return ProductCoefficients(basis1, rows1, basis2, rows2, A @ F @ B.T)


# measured properties -------------------------------------------------------

def norm_profile(basis: HaarBasis) -> dict:
    """Measured constants for the L^p size bounds of the cancellative functions.

    Returns the maximum of ||h||_1 ||h||_inf, the largest
    |<h>_{child}| mu(child)^(1/2) over children, and for p in {1, 2, inf} the
    range of ||h||_p / mu(Q)^(1/p - 1/2).
    """
    w = basis.weights
    sys = basis.sys
    rows = np.flatnonzero(basis.row_u >= 1)
    out = {"l1_linf_max": 0.0, "child_average_max": 0.0}
    ratios = {1: [], 2: [], "inf": []}
    for r in rows:
        h = basis.H[r]
        cid = int(basis.row_cube[r])
        mQ = sys.mass[cid]
        l1 = float(np.sum(np.abs(h) * w))
        l2 = float(np.sqrt(np.sum(h * h * w)))
        linf = float(np.max(np.abs(h[w > 0]))) if np.any(w > 0) else 0.0
        out["l1_linf_max"] = max(out["l1_linf_max"], l1 * linf)
        ratios[1].append(l1 / mQ ** 0.5)
        ratios[2].append(l2)
        ratios["inf"].append(linf / mQ ** -0.5)
        for q in basis.child_order.get(cid, []):
            mq = sys.mass[q]
            avg = float(np.sum(h[sys.cubes[q].members] * w[sys.cubes[q].members]) / mq)
            out["child_average_max"] = max(out["child_average_max"], abs(avg) * mq ** 0.5)
    for p, v in ratios.items():
        out[f"p{p}_min"] = float(min(v)) if v else float("nan")
        out[f"p{p}_max"] = float(max(v)) if v else float("nan")
    return out
