"""Finite quasimetric measure spaces with a dominating function.

A :class:`PointSpace` is a finite point set with a distance table, point
weights and a quasitriangle constant ``A0``.  Integrals are weighted sums.
Points are addressed internally by their row index; the user-facing ids are
kept in ``space.ids``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import _backend
from .errors import EmptySpace, NegativeWeight, UnknownPoint


@dataclass(frozen=True, eq=False)
class PointSpace:
    ids: tuple
    coords: np.ndarray
    rho: np.ndarray
    weights: np.ndarray
    A0: float = 1.0
    regularity: Optional[Callable[[float], float]] = None
    metric_kind: str = "table"

    def __post_init__(self):
        rho = np.ascontiguousarray(self.rho, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        rho.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=np.float64)
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def index(self) -> dict:
        return {p: i for i, p in enumerate(self.ids)}

    def idx(self, point) -> int:
        try:
            return self.index[point]
        except KeyError:
            raise UnknownPoint(point) from None

    @cached_property
    def min_positive_distance(self) -> float:
        off = self.rho[~np.eye(self.n, dtype=bool)]
        off = off[off > 0]
        return float(off.min()) if off.size else 1.0

    @cached_property
    def diameter(self) -> float:
        return float(self.rho.max()) if self.n else 0.0

    def mass(self, members) -> float:
        return float(self.weights[np.asarray(members, dtype=np.int64)].sum())

    def ball_mask(self, center_idx: int, radius: float) -> np.ndarray:
        return self.rho[center_idx] < radius


def _metric_table(coords: np.ndarray, kind: str) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    if kind == "euclidean":
        return np.sqrt((diff ** 2).sum(-1))
    if kind == "sup":
        return np.abs(diff).max(-1)
    raise ValueError(f"unknown metric kind {kind!r}")


def from_coords(coords, weights=None, metric: str = "euclidean", A0: float = 1.0,
                ids: Optional[Sequence] = None, regularity=None) -> PointSpace:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    n = coords.shape[0]
    if n == 0:
        raise EmptySpace("no points")
    if weights is None:
        weights = np.ones(n)
    ids = tuple(range(n)) if ids is None else tuple(ids)
    return PointSpace(ids, coords, _metric_table(coords, metric), np.asarray(weights, float),
                      float(A0), regularity, metric)


def from_table(table, weights, A0: float = 1.0, ids=None, coords=None,
               regularity=None) -> PointSpace:
    table = np.asarray(table, dtype=np.float64)
    n = table.shape[0]
    if n == 0:
        raise EmptySpace("no points")
    ids = tuple(range(n)) if ids is None else tuple(ids)
    return PointSpace(ids, coords, table, np.asarray(weights, float), float(A0), regularity,
                      "table")


# dominating functions ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class DominatingFunction:
    """``lam(x_idx, r)`` evaluates lambda for point indices and radii (broadcasting)."""
    lam: Callable[[np.ndarray, np.ndarray], np.ndarray]
    C_lambda: float
    symmetry_constant: float = 1.0
    spec: dict = field(default_factory=dict)

    @property
    def t_lambda(self) -> float:
        return math.log2(self.C_lambda)

    def __call__(self, x, r):
        return self.lam(np.asarray(x), np.asarray(r, dtype=np.float64))


def power_dominating(exponent: float, scale: float = 1.0, floor: float = 0.0) -> DominatingFunction:
    """lambda(x, r) = max(scale * r**exponent, floor); doubling constant 2**exponent."""

    def lam(x, r):
        return np.broadcast_to(np.maximum(scale * r ** exponent, floor),
                               np.broadcast_shapes(np.shape(x), np.shape(r))).astype(float)

    return DominatingFunction(lam, 2.0 ** exponent, 1.0,
                              {"kind": "power", "exponent": exponent, "scale": scale,
                               "floor": floor})


def fit_power_dominating(space: "PointSpace", exponent: float, floor: Optional[float] = None,
                         margin: float = 1.0) -> DominatingFunction:
    """Smallest scale with mu(B(x, r)) <= max(scale r^exponent, floor) for all x, r.

    Open balls: the mass jumps just above each distance d, so the binding
    constraints are mu({y: rho(x, y) <= d}) / d^exponent.  The default floor
    is the largest point weight.
    """
    w = space.weights
    floor = float(w.max()) if floor is None else float(floor)
    order = np.argsort(space.rho, axis=1, kind="stable")
    d = np.take_along_axis(space.rho, order, axis=1)
    cum = np.cumsum(w[order], axis=1)
    # mass of the closed ball of radius d[:, j] includes ties
    closed = np.empty_like(cum)
    for i in range(space.n):
        last = np.searchsorted(d[i], d[i], side="right") - 1
        closed[i] = cum[i, last]
    pos = (d > 0) & (closed > floor)
    scale = float(np.max(closed[pos] / d[pos] ** exponent)) if np.any(pos) else 1.0
    return power_dominating(exponent, scale * margin, floor)


def table_dominating(radii, values, C_lambda: float, symmetry_constant: float = 1.0):
    """Per-point step function: lambda(x, r) = values[x, j] with radii[j] the first grid radius >= r.

    Beyond the last grid radius the last column is extended by the doubling rule.
    """
    radii = np.asarray(radii, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)

    def lam(x, r):
        x, r = np.broadcast_arrays(np.asarray(x), np.asarray(r, dtype=float))
        j = np.searchsorted(radii, r, side="left")
        jj = np.minimum(j, len(radii) - 1)
        out = values[x, jj]
        over = j >= len(radii)
        if np.any(over):
            k = np.ceil(np.log2(r[over] / radii[-1]))
            out = np.array(out, dtype=float)
            out[over] = values[x[over], -1] * C_lambda ** k
        return out

    return DominatingFunction(lam, float(C_lambda), float(symmetry_constant),
                              {"kind": "table", "radii": radii.tolist(),
                               "values": values.tolist()})


@dataclass(frozen=True)
class Ball:
    center: object
    radius: float


def ball_members(space: PointSpace, b: Ball) -> set:
    if not b.radius > 0:
        raise ValueError("radius must be positive")
    c = space.idx(b.center)
    return {space.ids[i] for i in np.flatnonzero(space.rho[c] < b.radius)}


def ball_masses(space: PointSpace, radii) -> np.ndarray:
    """mu(B(x, r)) for every point x (rows) and every radius (columns)."""
    radii = np.asarray(radii, dtype=np.float64)
    order = np.argsort(space.rho, axis=1, kind="stable")
    d_sorted = np.take_along_axis(space.rho, order, axis=1)
    cum = np.concatenate([np.zeros((space.n, 1)), np.cumsum(space.weights[order], axis=1)], axis=1)
    out = np.empty((space.n, radii.size))
    for i in range(space.n):
        cnt = np.searchsorted(d_sorted[i], radii, side="left")
        out[i] = cum[i, cnt]
    return out


# validation --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def add(self, kind, witness, detail=""):
        self.violations.append(Violation(kind, tuple(witness), detail))

    def to_dict(self):
        return [{"kind": v.kind, "witness": [_plain(w) for w in v.witness], "detail": v.detail}
                for v in self.violations]


def _plain(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def default_radius_grid(space: PointSpace) -> np.ndarray:
    rmin = space.min_positive_distance
    diam = max(space.diameter, rmin)
    jmax = int(math.ceil(math.log2(diam / rmin))) + 1
    return rmin * 2.0 ** np.arange(jmax + 1)


def _witnesses(mask, severity, limit):
    idx = np.argwhere(mask)
    if idx.size == 0:
        return []
    sev = severity[tuple(idx.T)]
    order = np.lexsort(tuple(idx.T[::-1]) + (-sev,))
    return [tuple(idx[o]) for o in order[:limit]]


def validate_space(space: PointSpace, dom: Optional[DominatingFunction] = None,
                   radius_grid=None, eps_grid=None, rtol: float = 1e-12,
                   max_witnesses: int = 5) -> ValidationReport:
    if space.n == 0:
        raise EmptySpace("no points")
    w = space.weights
    if np.any(w < 0):
        raise NegativeWeight(space.ids[int(np.argmax(w < 0))])
    rep = ValidationReport()
    rho = space.rho
    ids = space.ids
    n = space.n
    off = ~np.eye(n, dtype=bool)

    if space.total_mass <= 0:
        rep.add("total_mass", (), "total mass is zero")
    diag_bad = np.flatnonzero(np.diag(rho) != 0)
    for i in diag_bad[:max_witnesses]:
        rep.add("rho_diagonal", (ids[i],), f"rho(x,x)={rho[i, i]}")
    zero_off = off & (rho <= 0)
    for i, j in _witnesses(zero_off, -np.abs(rho), max_witnesses):
        rep.add("rho_positive", (ids[i], ids[j]), f"rho={rho[i, j]}")
    asym = np.abs(rho - rho.T) > rtol * np.maximum(np.abs(rho), 1.0)
    for i, j in _witnesses(np.triu(asym, 1), np.abs(rho - rho.T), max_witnesses):
        rep.add("rho_symmetric", (ids[i], ids[j]), f"{rho[i, j]} != {rho[j, i]}")

    best, arg = _backend.minplus(rho)
    excess = rho - space.A0 * best
    bad = excess > rtol * np.maximum(rho, 1e-300)
    for x, z in _witnesses(bad, excess, max_witnesses):
        y = int(arg[x, z])
        rep.add("quasitriangle", (ids[x], ids[y], ids[z]),
                f"rho(x,z)={rho[x, z]} > A0*(rho(x,y)+rho(y,z))={space.A0 * best[x, z]}")

    if space.regularity is not None and eps_grid is not None:
        for eps in eps_grid:
            a = float(space.regularity(eps))
            # min over z of (1+eps) rho(x,z) + A(eps) rho(z,y)
            m = np.full((n, n), np.inf)
            for z in range(n):
                np.minimum(m, (1 + eps) * rho[:, z][:, None] + a * rho[z, :][None, :], out=m)
            badr = rho > m * (1 + rtol)
            for x, y in _witnesses(badr, rho - m, max_witnesses):
                rep.add("regularity", (ids[x], ids[y], float(eps)), f"A({eps})={a}")

    if dom is not None:
        grid = default_radius_grid(space) if radius_grid is None else np.asarray(radius_grid, float)
        if grid.size == 0 or np.any(grid <= 0):
            raise ValueError("radius grid must be nonempty and positive")
        if np.any(np.diff(grid) < 0):
            raise ValueError("radius grid must be sorted ascending")
        xs = np.arange(n)[:, None]
        L = dom(xs, grid[None, :])
        L2 = dom(xs, 2 * grid[None, :])
        if np.any(L <= 0):
            i, j = np.argwhere(L <= 0)[0]
            rep.add("lambda_positive", (ids[i], float(grid[j])), f"lambda={L[i, j]}")
        mono = L[:, 1:] < L[:, :-1] * (1 - rtol)
        for i, j in _witnesses(mono, L[:, :-1] - L[:, 1:], max_witnesses):
            rep.add("lambda_monotone", (ids[i], float(grid[j]), float(grid[j + 1])), "")
        dbl = L2 > dom.C_lambda * L * (1 + rtol)
        for i, j in _witnesses(dbl, L2 - dom.C_lambda * L, max_witnesses):
            rep.add("lambda_doubling", (ids[i], float(grid[j])),
                    f"lambda(x,2r)={L2[i, j]} > C*lambda(x,r)={dom.C_lambda * L[i, j]}")
        bm = ball_masses(space, grid)
        over = bm > L * (1 + rtol)
        for i, j in _witnesses(over, bm - L, max_witnesses):
            rep.add("ball_mass", (ids[i], float(grid[j])), f"mu(B)={bm[i, j]} > lambda={L[i, j]}")
        C = dom.symmetry_constant
        for j, r in enumerate(grid):
            close = rho <= r
            viol = close & (L[:, j][:, None] > C * L[:, j][None, :] * (1 + rtol))
            for x, y in _witnesses(viol, L[:, j][:, None] - C * L[:, j][None, :], max_witnesses):
                rep.add("lambda_symmetry", (ids[x], ids[y], float(r)), "")
    return rep


def tail_integral(space: PointSpace, dom: DominatingFunction, center, r_B: float,
                  eps: float) -> float:
    """Sum over points outside B(center, r_B) of rho^-eps / lambda(center, rho) * weight."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    c = space.idx(center)
    d = space.rho[c]
    out = d >= r_B
    if not np.any(out):
        return 0.0
    dd = d[out]
    lam = dom(np.full(dd.shape, c), dd)
    return float(np.sum(dd ** (-eps) / lam * space.weights[out]))


def tail_bound(dom: DominatingFunction, r_B: float, eps: float) -> float:
    a_eps = 2.0 ** eps / (2.0 ** eps - 1.0)
    return dom.C_lambda * a_eps * r_B ** (-eps)


# serialization -----------------------------------------------------------

def space_to_dict(space: PointSpace, dom: Optional[DominatingFunction] = None) -> dict:
    pts = []
    for i, p in enumerate(space.ids):
        coords = [] if space.coords is None else [float(c) for c in space.coords[i]]
        pts.append({"id": _plain(p), "coords": coords, "weight": float(space.weights[i])})
    metric = {"kind": space.metric_kind}
    if space.metric_kind == "table":
        metric["table"] = space.rho.tolist()
    d = {"points": pts, "metric": metric, "A0": space.A0}
    if dom is not None:
        d["lambda"] = dict(dom.spec)
        d["lambda"]["C_lambda"] = dom.C_lambda
    return d


def space_from_dict(d: dict):
    pts = d["points"]
    if not pts:
        raise EmptySpace("no points")
    ids = [p["id"] for p in pts]
    w = np.array([p.get("weight", 1.0) for p in pts], dtype=float)
    metric = d.get("metric", {"kind": "euclidean"})
    kind = metric.get("kind", "euclidean")
    A0 = float(d.get("A0", 1.0))
    if kind == "table":
        coords = None
        if all(p.get("coords") for p in pts):
            coords = np.array([p["coords"] for p in pts], float)
        sp = from_table(metric["table"], w, A0, ids=ids, coords=coords)
    else:
        sp = from_coords([p["coords"] for p in pts], w, kind, A0, ids=ids)
    lam = d.get("lambda")
    dom = None
    if lam is not None:
        if lam.get("kind", "power") == "power":
            dom = power_dominating(float(lam.get("exponent", 1.0)), float(lam.get("scale", 1.0)),
                                   float(lam.get("floor", 0.0)))
        elif lam["kind"] == "table":
            dom = table_dominating(lam["radii"], lam["values"], float(lam["C_lambda"]),
                                   float(lam.get("symmetry_constant", 1.0)))
        else:
            raise ValueError(f"unknown lambda kind {lam['kind']!r}")
    return sp, dom
