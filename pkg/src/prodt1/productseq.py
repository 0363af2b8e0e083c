"""Two-parameter sequence spaces: square function, BMO_prod, s1/t1/s2 norms,
lifting and projection, and the dyadic strong maximal function.

Functions on the product space are ``(n1, n2)`` arrays and the measure is
``w1 (x) w2``.  Coefficient fields live on the eligible rows of two
:class:`~prodt1.goodness.Frame` objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dyadic import DyadicSystem
from .errors import BadCubeEntry, NotRectUnion
from .goodness import Frame
from .haar import ProductCoefficients


def product_weights(w1, w2) -> np.ndarray:
    return np.outer(w1, w2)


def l2_norm(F, w1, w2) -> float:
    return float(np.sqrt(np.sum(np.abs(F) ** 2 * np.outer(w1, w2))))


def inner(F, G, w1, w2) -> float:
    return float(np.sum(F * G * np.outer(w1, w2)))


class ProductFrame:
    def __init__(self, frame1: Frame, frame2: Frame):
        self.f1 = frame1
        self.f2 = frame2

    @property
    def w1(self):
        return self.f1.space.weights

    @property
    def w2(self):
        return self.f2.space.weights

    @property
    def shape(self):
        return (self.f1.space.n, self.f2.space.n)

    @property
    def containers(self):
        return self.f1.container, self.f2.container

    def zeros(self) -> ProductCoefficients:
        return self.coefficients(np.zeros((self.f1.n_rows, self.f2.n_rows)))

    def coefficients(self, values) -> ProductCoefficients:
        return ProductCoefficients(self.f1.basis, self.f1.rows, self.f2.basis, self.f2.rows, values)

    def lift(self, F) -> ProductCoefficients:
        A = self.f1.H * self.w1
        B = self.f2.H * self.w2
        return self.coefficients(A @ np.asarray(F, float) @ B.T)

    def project(self, c: ProductCoefficients) -> np.ndarray:
        c = self.conform(c)
        return self.f1.H.T @ c.values @ self.f2.H

    def conform(self, c: ProductCoefficients) -> ProductCoefficients:
        """Re-index ``c`` onto the eligible rows; nonzero entries elsewhere raise BadCubeEntry."""
        if (c.basis1 is self.f1.basis and c.basis2 is self.f2.basis
                and np.array_equal(c.rows1, self.f1.rows) and np.array_equal(c.rows2, self.f2.rows)):
            return c
        if c.basis1 is not self.f1.basis or c.basis2 is not self.f2.basis:
            raise BadCubeEntry("coefficients built on other bases")
        pos1 = {int(r): i for i, r in enumerate(self.f1.rows)}
        pos2 = {int(r): i for i, r in enumerate(self.f2.rows)}
        out = np.zeros((self.f1.n_rows, self.f2.n_rows))
        for (i, j) in zip(*np.nonzero(c.values)):
            a = pos1.get(int(c.rows1[i]))
            b = pos2.get(int(c.rows2[j]))
            if a is None or b is None:
                raise BadCubeEntry((int(c.rows1[i]), int(c.rows2[j])))
            out[a, b] += c.values[i, j]
        return self.coefficients(out)

    # containers ---------------------------------------------------------
    def container_energy(self, c: ProductCoefficients) -> np.ndarray:
        """sum of |c_R|^2 grouped by container pair S(R)."""
        c = self.conform(c)
        return self.f1.row_to_container @ (c.values ** 2) @ self.f2.row_to_container.T

    def container_masses(self):
        return self.f1.cont_mass, self.f2.cont_mass


# square function and norms -------------------------------------------------

def square_function(c: ProductCoefficients, pf: ProductFrame):
    """Pointwise (sum |c_R|^2 chi_S(R) / mu(S(R)))^(1/2) and its L1 norm."""
    c = pf.conform(c)
    S2 = pf.f1.E.T @ (c.values ** 2) @ pf.f2.E
    S = np.sqrt(np.maximum(S2, 0.0))
    h1 = float(np.sum(S * np.outer(pf.w1, pf.w2)))
    return S, h1


def s1_norm(c: ProductCoefficients, pf: ProductFrame) -> float:
    return square_function(c, pf)[1]


def s2_norm(c: ProductCoefficients, pf: Optional[ProductFrame] = None) -> float:
    if pf is not None:
        c = pf.conform(c)
    return float(np.sqrt(np.sum(c.values ** 2)))


def h1_norm(F, pf: ProductFrame) -> float:
    return s1_norm(pf.lift(F), pf)


@dataclass
class AdmissibleOpenSet:
    """A union of rectangles of D'_1 x D'_2, kept as rectangle list and point mask."""
    sys1: DyadicSystem
    sys2: DyadicSystem
    rects: list
    mask: np.ndarray = None

    def __post_init__(self):
        if self.mask is None:
            m = np.zeros((self.sys1.space.n, self.sys2.space.n), dtype=bool)
            for a, b in self.rects:
                m[np.ix_(self.sys1.cubes[a].members, self.sys2.cubes[b].members)] = True
            self.mask = m

    def measure(self) -> float:
        return float(self.sys1.space.weights @ self.mask @ self.sys2.space.weights)

    @classmethod
    def from_mask(cls, mask, sys1: DyadicSystem, sys2: DyadicSystem, strict: bool = False):
        """Union of all D' rectangles inside ``mask`` (its admissible interior).

        With ``strict`` the mask must already be such a union (NotRectUnion otherwise).
        """
        mask = np.asarray(mask, dtype=bool)
        inside = _contained_rectangles(mask, sys1, sys2)
        rects = [(int(a), int(b)) for a, b in np.argwhere(inside)]
        obj = cls(sys1, sys2, _maximal_only(rects, sys1, sys2))
        if strict and not np.array_equal(obj.mask, mask):
            raise NotRectUnion("mask is not a union of dyadic rectangles")
        return obj


def _contained_rectangles(mask, sys1, sys2) -> np.ndarray:
    """Boolean (ncubes1, ncubes2): rectangle A x B lies inside mask."""
    I1 = sys1.indicator
    I2 = sys2.indicator
    outside = I1 @ (~mask).astype(float) @ I2.T
    return outside < 0.5


def _maximal_only(rects, sys1, sys2):
    s = set(rects)
    out = []
    for a, b in rects:
        pa = sys1.cubes[a].parent
        pb = sys2.cubes[b].parent
        if (pa >= 0 and (pa, b) in s) or (pb >= 0 and (a, pb) in s):
            continue
        out.append((a, b))
    return out


@dataclass
class CandidateFamily:
    """Sets over which BMO_prod / t1 suprema are taken."""
    singles: bool = True
    sets: list = field(default_factory=list)


def _containment(sys: DyadicSystem, containers: np.ndarray) -> np.ndarray:
    """K[A, p] = 1 when container p (a cube of sys) is inside cube A."""
    I = sys.indicator
    sub = I[containers]
    sizes = sub.sum(axis=1)
    overlap = I @ sub.T
    return (np.abs(overlap - sizes[None, :]) < 0.5).astype(float)


def bmo_norm_detail(c: ProductCoefficients, pf: ProductFrame, family: CandidateFamily):
    """Return (norm, description of the maximizing set)."""
    G = pf.container_energy(c)
    sys1, sys2 = pf.containers
    best, where = 0.0, None
    if family.singles:
        K1 = _containment(sys1, pf.f1.containers)
        K2 = _containment(sys2, pf.f2.containers)
        sums = K1 @ G @ K2.T
        mu = np.outer(sys1.mass, sys2.mass)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mu > 0, sums / mu, 0.0)
        if ratio.size:
            i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
            if ratio[i, j] > best:
                best, where = float(ratio[i, j]), ("rectangle", int(i), int(j))
    if family.sets:
        P1 = sys1.indicator[pf.f1.containers]
        P2 = sys2.indicator[pf.f2.containers]
        for si, om in enumerate(family.sets):
            mask = om.mask if isinstance(om, AdmissibleOpenSet) else np.asarray(om, bool)
            mu = float(pf.w1 @ mask @ pf.w2)
            if mu <= 0:
                continue
            outside = P1 @ (~mask).astype(float) @ P2.T
            val = float(np.sum(G[outside < 0.5])) / mu
            if val > best:
                best, where = val, ("set", si)
    return float(np.sqrt(best)), where


def bmo_prod_norm(c: ProductCoefficients, pf: ProductFrame,
                  family: Optional[CandidateFamily] = None) -> float:
    """max over candidate sets of (mu(Omega)^-1 sum_{S(R) in Omega} |c_R|^2)^(1/2)."""
    return bmo_norm_detail(c, pf, family or CandidateFamily())[0]


def t1_norm(c: ProductCoefficients, pf: ProductFrame,
            family: Optional[CandidateFamily] = None) -> float:
    return bmo_prod_norm(c, pf, family)


def bmo_prod_norm_function(b, pf: ProductFrame, family: Optional[CandidateFamily] = None) -> float:
    return bmo_prod_norm(pf.lift(b), pf, family)


def duality_pairing(s: ProductCoefficients, t: ProductCoefficients) -> float:
    if not (np.array_equal(s.rows1, t.rows1) and np.array_equal(s.rows2, t.rows2)
            and s.basis1 is t.basis1 and s.basis2 is t.basis2):
        raise ValueError("coefficient fields on different index sets")
    return float(np.sum(s.values * t.values))


# strong maximal function ---------------------------------------------------

def dilated_masses(sys: DyadicSystem, dilation: float = 5.0) -> np.ndarray:
    rho = sys.space.rho
    w = sys.space.weights
    radii = dilation * sys.C_Q * sys.ell
    return np.array([w[rho[c.center] < radii[c.id]].sum() for c in sys.cubes])


def strong_maximal(F, sys1: DyadicSystem, sys2: DyadicSystem, dilation: float = 5.0) -> np.ndarray:
    """M f(x) = max over D' rectangles R' containing x of mu(5R')^-1 int_R' |f|."""
    w1, w2 = sys1.space.weights, sys2.space.weights
    A = np.abs(np.asarray(F, float)) * np.outer(w1, w2)
    integ = sys1.indicator @ A @ sys2.indicator.T
    mu5 = np.outer(dilated_masses(sys1, dilation), dilated_masses(sys2, dilation))
    with np.errstate(divide="ignore", invalid="ignore"):
        V = np.where(mu5 > 0, integ / mu5, 0.0)
    n1, n2 = A.shape
    best1 = np.zeros((n1, V.shape[1]))
    for g in sys1.levels:
        np.maximum(best1, V[sys1.label[g]], out=best1)
    out = np.zeros((n1, n2))
    for g in sys2.levels:
        np.maximum(out, best1[:, sys2.label[g]], out=out)
    return out


def level_set(F, sys1: DyadicSystem, sys2: DyadicSystem, dilation: float = 5.0) -> AdmissibleOpenSet:
    """Admissible interior of {M_{D'} chi_F > 1/2} for a boolean mask F."""
    M = strong_maximal(np.asarray(F, float), sys1, sys2, dilation)
    return AdmissibleOpenSet.from_mask(M > 0.5, sys1, sys2)


def square_level_sets(c: ProductCoefficients, pf: ProductFrame, enlarge: bool = True) -> list:
    """Sets {S c > 2^j} (and their maximal-function enlargements) for all j in range."""
    S, _ = square_function(c, pf)
    pos = S[S > 0]
    if pos.size == 0:
        return []
    lo = int(np.floor(np.log2(pos.min()))) - 1
    hi = int(np.ceil(np.log2(pos.max())))
    sys1, sys2 = pf.containers
    out = []
    for j in range(lo, hi + 1):
        E = S > 2.0 ** j
        if not E.any():
            continue
        out.append(AdmissibleOpenSet.from_mask(E, sys1, sys2))
        if enlarge:
            out.append(level_set(E, sys1, sys2))
    return out


def norm_report(s: ProductCoefficients, t: ProductCoefficients, pf: ProductFrame,
                family: Optional[CandidateFamily] = None) -> dict:
    family = family or CandidateFamily()
    fam = CandidateFamily(family.singles, list(family.sets) + square_level_sets(s, pf))
    s1 = s1_norm(s, pf)
    t1 = t1_norm(t, pf, fam)
    pair = duality_pairing(pf.conform(s), pf.conform(t))
    ratio = abs(pair) / (s1 * t1) if s1 > 0 and t1 > 0 else 0.0
    return {"s1": s1, "t1": t1, "s2": s2_norm(s, pf), "h1": s1,
            "bmo": t1, "duality_ratio": ratio}
