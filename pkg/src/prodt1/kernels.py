"""Discrete bi-parameter singular integral kernels.

Operators act by ``(T f)(x) = sum_y K(x, y) f(y) mu(y)`` with ``x = (x1, x2)``
and ``y = (y1, y2)``.  Entries with ``x1 == y1`` or ``x2 == y2`` are never
used; a truncation ``tau > 0`` further keeps only ``rho1 > tau`` and
``rho2 > tau``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .linalg import PowerResult, power_norm, spectral_norm
from .space import DominatingFunction, PointSpace, ValidationReport

ADJOINTS = ("T", "T*", "T1", "T1*")


@dataclass(frozen=True)
class FactorKernel:
    """One-parameter kernel matrix K[x, y] with its declared constants."""
    K: np.ndarray
    C: float = 1.0
    C_size: float = 1.0
    C_holder: float = 1.0
    alpha: float = 1.0
    C_K: float = 2.0


def size_factor(space: PointSpace, dom: DominatingFunction, C_K: float = 2.0,
                exponent: Optional[float] = None) -> FactorKernel:
    """K(x, y) = 1 / lambda(x, rho(x, y)); size constant 1.

    For a power-law lambda of exponent p on a Euclidean metric the Lipschitz
    bound gives the Hoelder constant p (1 - 1/C_K)^-(p+1) with alpha = 1.
    """
    n = space.n
    idx = np.arange(n)
    with np.errstate(divide="ignore"):
        lam = dom(idx[:, None], space.rho)
        K = np.where(space.rho > 0, 1.0 / lam, 0.0)
    p = exponent if exponent is not None else dom.t_lambda
    Ch = p * (1.0 - 1.0 / C_K) ** -(p + 1)
    return FactorKernel(K, max(1.0, Ch), 1.0, Ch, 1.0, C_K)


def riesz_factor(space: PointSpace, dom: DominatingFunction, direction=None,
                 C_K: float = 2.0, exponent: Optional[float] = None) -> FactorKernel:
    """K(x, y) = ((x - y) . e / rho(x, y)) / lambda(x, rho(x, y)); antisymmetric.

    Needs coordinates with the Euclidean metric and lambda = scale * r^p.
    Hoelder constant (p + 2)(1 - 1/C_K)^-(p+1) with alpha = 1.
    """
    if space.coords is None:
        raise ValueError("riesz factor needs coordinates")
    X = space.coords
    e = np.zeros(X.shape[1])
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, float) / np.linalg.norm(direction)
    proj = (X[:, None, :] - X[None, :, :]) @ e
    rho = space.rho
    idx = np.arange(space.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = dom(idx[:, None], rho)
        K = np.where(rho > 0, proj / rho / lam, 0.0)
    p = exponent if exponent is not None else dom.t_lambda
    Ch = (p + 2.0) * (1.0 - 1.0 / C_K) ** -(p + 1)
    return FactorKernel(K, max(1.0, Ch), 1.0, Ch, 1.0, C_K)


@dataclass
class KernelSpec:
    """Either a product of factor matrices or a full table K[x1, x2, y1, y2]."""
    kind: str
    factors: tuple = ()
    table: Optional[np.ndarray] = None
    C: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    C_K: float = 2.0
    adjoint_of: str = "T"

    @property
    def is_product(self) -> bool:
        return self.kind == "product"

    @property
    def shape(self):
        if self.is_product:
            return (self.factors[0].shape[0], self.factors[1].shape[0])
        return self.table.shape[:2]

    def evaluate(self, x1, x2, y1, y2):
        if self.is_product:
            return self.factors[0][x1, y1] * self.factors[1][x2, y2]
        return self.table[x1, x2, y1, y2]

    def adjoint(self, which: str) -> "KernelSpec":
        """Kernel of T, T*, T1 or T1* (relative to this kernel)."""
        if which not in ADJOINTS:
            raise ValueError(which)
        if which == "T":
            return self
        if self.is_product:
            A, B = self.factors
            f = {"T*": (A.T, B.T), "T1": (A.T, B), "T1*": (A, B.T)}[which]
            return replace(self, factors=f, adjoint_of=which)
        perm = {"T*": (2, 3, 0, 1), "T1": (2, 1, 0, 3), "T1*": (0, 3, 2, 1)}[which]
        return replace(self, table=np.ascontiguousarray(self.table.transpose(perm)),
                       adjoint_of=which)

    def dense_table(self) -> np.ndarray:
        """K with both diagonals zeroed, shape (n1, n2, n1, n2)."""
        if self.is_product:
            A, B = self.factors
            T = np.einsum("ac,bd->abcd", A, B)
        else:
            T = np.array(self.table, float)
        n1, n2 = self.shape
        T[np.arange(n1), :, np.arange(n1), :] = 0.0
        T[:, np.arange(n2), :, np.arange(n2)] = 0.0
        return T

    def to_dict(self) -> dict:
        d = {"kind": self.kind,
             "constants": {"C": self.C, "alpha1": self.alpha1, "alpha2": self.alpha2,
                           "CK": self.C_K}}
        if self.is_product:
            d["factors"] = [np.asarray(f).tolist() for f in self.factors]
        else:
            d["table"] = np.asarray(self.table).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        c = d.get("constants", {})
        kw = dict(C=float(c.get("C", 1.0)), alpha1=float(c.get("alpha1", 1.0)),
                  alpha2=float(c.get("alpha2", 1.0)), C_K=float(c.get("CK", 2.0)))
        if d["kind"] == "product":
            f = tuple(np.asarray(x, float) for x in d["factors"])
            return cls("product", factors=f, **kw)
        if d["kind"] == "table":
            return cls("table", table=np.asarray(d["table"], float), **kw)
        raise ValueError(f"unknown kernel kind {d['kind']!r}")

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def product_kernel(K1: FactorKernel, K2: FactorKernel) -> KernelSpec:
    """K = K1 (x) K2 with merged constants.

    Size, double Hoelder and the two mixed conditions need C_s1 C_s2,
    C_h1 C_h2, C_h1 C_s2 and C_s1 C_h2; the merged C is their maximum.
    """
    C = max(K1.C_size * K2.C_size, K1.C_holder * K2.C_holder,
            K1.C_holder * K2.C_size, K1.C_size * K2.C_holder)
    return KernelSpec("product", factors=(np.asarray(K1.K, float), np.asarray(K2.K, float)),
                      C=C, alpha1=K1.alpha, alpha2=K2.alpha, C_K=max(K1.C_K, K2.C_K))


def table_kernel(table, C=1.0, alpha1=1.0, alpha2=1.0, C_K=2.0) -> KernelSpec:
    return KernelSpec("table", table=np.asarray(table, float), C=C, alpha1=alpha1,
                      alpha2=alpha2, C_K=C_K)


# operators ---------------------------------------------------------------------

class KernelOperator:
    """A kernel with its spaces and an optional truncation tau."""

    def __init__(self, spec: KernelSpec, space1: PointSpace, space2: PointSpace,
                 tau: Optional[float] = None):
        if tau is not None and not tau > 0:
            raise ValueError("tau must be positive")
        self.spec = spec
        self.s1 = space1
        self.s2 = space2
        self.tau = tau
        if spec.shape != (space1.n, space2.n):
            raise ValueError("kernel shape does not match spaces")

    @property
    def w1(self):
        return self.s1.weights

    @property
    def w2(self):
        return self.s2.weights

    @property
    def weights(self):
        return np.outer(self.w1, self.w2)

    def masks(self):
        t = 0.0 if self.tau is None else self.tau
        return self.s1.rho > t, self.s2.rho > t

    def factor_matrices(self):
        m1, m2 = self.masks()
        A, B = self.spec.factors
        return A * m1, B * m2

    def table(self) -> np.ndarray:
        m1, m2 = self.masks()
        if self.spec.is_product:
            A, B = self.factor_matrices()
            return np.einsum("ac,bd->abcd", A, B)
        return self.spec.table * m1[:, None, :, None] * m2[None, :, None, :]

    def matrix(self) -> np.ndarray:
        """M with (T f).ravel() = M @ (f * mu).ravel()."""
        n1, n2 = self.spec.shape
        if self.spec.is_product:
            A, B = self.factor_matrices()
            return np.kron(A, B)
        return self.table().reshape(n1 * n2, n1 * n2)

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, float)
        g = f * self.weights
        if self.spec.is_product:
            A, B = self.factor_matrices()
            return A @ g @ B.T
        n1, n2 = self.spec.shape
        return (self.table().reshape(n1 * n2, n1 * n2) @ g.ravel()).reshape(n1, n2)

    def adjoint(self, which: str = "T*") -> "KernelOperator":
        return KernelOperator(self.spec.adjoint(which), self.s1, self.s2, self.tau)

    def truncate(self, tau: float) -> "KernelOperator":
        return KernelOperator(self.spec, self.s1, self.s2, tau)

    def weighted_matrix(self) -> np.ndarray:
        s = np.sqrt(self.weights.ravel())
        return s[:, None] * self.matrix() * s[None, :]

    def inner(self, f, g) -> float:
        return float(np.sum(self.apply(f) * np.asarray(g, float) * self.weights))


def truncated(spec: KernelSpec, space1, space2, tau: float) -> KernelOperator:
    return KernelOperator(spec, space1, space2, tau)


def apply(T: KernelOperator, f) -> np.ndarray:
    return T.apply(f)


@dataclass
class NormEstimate:
    value: float
    iterations: int
    converged: bool

    def __float__(self):
        return self.value


def operator_norm(T: KernelOperator, max_iters: int = 1000, tol: float = 1e-10,
                  seed: int = 0) -> NormEstimate:
    """Largest singular value on L2(mu) by power iteration on T*T.

    ``converged`` is False when ``max_iters`` ran out; the best estimate is
    still returned.
    """
    s1, s2 = np.sqrt(T.w1), np.sqrt(T.w2)
    n1, n2 = T.spec.shape
    if T.spec.is_product:
        A, B = T.factor_matrices()
        A = s1[:, None] * A * s1[None, :]
        B = s2[:, None] * B * s2[None, :]
        mv = lambda x: (A @ x.reshape(n1, n2) @ B.T).ravel()
        rmv = lambda y: (A.T @ y.reshape(n1, n2) @ B).ravel()
    else:
        W = T.weighted_matrix()
        mv = lambda x: W @ x
        rmv = lambda y: W.T @ y
    r = power_norm(mv, rmv, n1 * n2, max_iters, tol, seed)
    return NormEstimate(r.value, r.iterations, r.converged)


def dense_norm(T: KernelOperator) -> float:
    """SVD oracle; product kernels factor as a Kronecker product."""
    if T.spec.is_product:
        s1, s2 = np.sqrt(T.w1), np.sqrt(T.w2)
        A, B = T.factor_matrices()
        return spectral_norm(s1[:, None] * A * s1) * spectral_norm(s2[:, None] * B * s2)
    return spectral_norm(T.weighted_matrix())


# assumption audit ----------------------------------------------------------------

def _eval_op(spec: KernelSpec, which, x1, x2, y1, y2):
    if which == "T":
        return spec.evaluate(x1, x2, y1, y2)
    if which == "T*":
        return spec.evaluate(y1, y2, x1, x2)
    if which == "T1":
        return spec.evaluate(y1, x2, x1, y2)
    return spec.evaluate(x1, y2, y1, x2)


def _near(rho, base, rng, k):
    """A random point among the k nearest (excluding itself) of each base point."""
    order = np.argsort(rho[base], axis=1)[:, 1:k + 1]
    pick = rng.integers(0, order.shape[1], base.size)
    return order[np.arange(base.size), pick]


def validate_assumptions(K: KernelSpec, space1: PointSpace, space2: PointSpace,
                         dom1: DominatingFunction, dom2: DominatingFunction,
                         samples: int = 100_000, seed: int = 0, rtol: float = 1e-9,
                         max_witnesses: int = 5, test_pairs: int = 50,
                         exhaustive_size_limit: int = 4_000_000) -> tuple:
    """Sampled audit of size, double Hoelder and mixed conditions for T, T*, T1, T1*.

    Returns ``(report, fit)``: ``fit`` holds the measured partial-kernel
    constant C(f2, g2) / (||f2|| ||g2||) for product kernels (None otherwise).
    The size condition is checked on every off-diagonal tuple when the table
    has at most ``exhaustive_size_limit`` entries.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n1, n2 = space1.n, space2.n
    rho1, rho2 = space1.rho, space2.rho
    rep = ValidationReport()
    if n1 < 2 or n2 < 2:
        return rep, None
    x1 = rng.integers(0, n1, samples)
    x2 = rng.integers(0, n2, samples)
    y1 = (x1 + rng.integers(1, n1, samples)) % n1
    y2 = (x2 + rng.integers(1, n2, samples)) % n2
    k1, k2 = min(8, n1 - 1), min(8, n2 - 1)
    z1 = _near(rho1, y1, rng, k1)
    z2 = _near(rho2, y2, rng, k2)
    r1, r2 = rho1[x1, y1], rho2[x2, y2]
    l1, l2 = dom1(x1, r1), dom2(x2, r2)
    g1 = (r1 >= K.C_K * rho1[y1, z1]) & (z1 != x1)
    g2 = (r2 >= K.C_K * rho2[y2, z2]) & (z2 != x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h1 = (rho1[y1, z1] / r1) ** K.alpha1 / l1
        h2 = (rho2[y2, z2] / r2) ** K.alpha2 / l2
    for which in ADJOINTS:
        e = lambda a, b, c, d: _eval_op(K, which, a, b, c, d)
        kxy = e(x1, x2, y1, y2)
        checks = []
        checks.append(("size", np.ones(samples, bool), np.abs(kxy), K.C / (l1 * l2)))
        dd = kxy - e(x1, x2, y1, z2) - e(x1, x2, z1, y2) + e(x1, x2, z1, z2)
        checks.append(("holder", g1 & g2, np.abs(dd), K.C * h1 * h2))
        checks.append(("mixed1", g1, np.abs(kxy - e(x1, x2, z1, y2)), K.C * h1 / l2))
        checks.append(("mixed2", g2, np.abs(kxy - e(x1, x2, y1, z2)), K.C * h2 / l1))
        for name, guard, lhs, rhs in checks:
            bad = guard & (lhs > rhs * (1 + rtol) + 1e-300)
            if np.any(bad):
                sev = np.where(bad, lhs / np.maximum(rhs, 1e-300), 0.0)
                for i in np.argsort(-sev)[:max_witnesses]:
                    if not bad[i]:
                        break
                    rep.add(f"{name}:{which}",
                            (int(x1[i]), int(x2[i]), int(y1[i]), int(y2[i]), int(z1[i]), int(z2[i])),
                            f"lhs={lhs[i]:.6g} rhs={rhs[i]:.6g}")
    if n1 * n1 * n2 * n2 <= exhaustive_size_limit:
        _exhaustive_size(K, space1, space2, dom1, dom2, rep, rtol, max_witnesses)
    fit = None
    if K.is_product:
        fit = _partial_fit(K, space1, space2, rng, test_pairs)
    return rep, fit


def _partial_fit(K: KernelSpec, space1, space2, rng, pairs: int) -> dict:
    """C(f_j, g_j) = |<T_j f_j, g_j>| for random test pairs, times the factor size constant."""
    out = {}
    for j, (sp, A) in enumerate(((space1, K.factors[0]), (space2, K.factors[1])), start=1):
        w = sp.weights
        A0 = A * (sp.rho > 0)
        best = 0.0
        for _ in range(pairs):
            f = rng.normal(size=sp.n)
            g = rng.normal(size=sp.n)
            nf = np.sqrt(np.sum(f * f * w))
            ng = np.sqrt(np.sum(g * g * w))
            if nf > 0 and ng > 0:
                best = max(best, abs(float(np.sum((A0 @ (f * w)) * g * w))) / (nf * ng))
        out[f"factor{j}"] = best
    return out


def _exhaustive_size(K, space1, space2, dom1, dom2, rep, rtol, max_witnesses):
    n1, n2 = space1.n, space2.n
    i1, i2 = np.arange(n1), np.arange(n2)
    with np.errstate(divide="ignore"):
        inv1 = np.where(space1.rho > 0, 1.0 / dom1(i1[:, None], space1.rho), 0.0)
        inv2 = np.where(space2.rho > 0, 1.0 / dom2(i2[:, None], space2.rho), 0.0)
    rhs = K.C * inv1[:, None, :, None] * inv2[None, :, None, :]
    seen = {v.kind for v in rep.violations}
    for which in ADJOINTS:
        if f"size:{which}" in seen:
            continue
        T = np.abs(K.adjoint(which).dense_table())
        bad = T > rhs * (1 + rtol) + 1e-300
        if np.any(bad):
            idx = np.argwhere(bad)
            sev = T[bad] / np.maximum(rhs[bad], 1e-300)
            for j in np.argsort(-sev)[:max_witnesses]:
                a, b, c, d = (int(v) for v in idx[j])
                rep.add(f"size:{which}", (a, b, c, d), f"lhs={T[a, b, c, d]:.6g} rhs={rhs[a, b, c, d]:.6g}")
