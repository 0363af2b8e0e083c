"""Systems of dyadic cubes on a finite quasimetric space.

Centers of generation ``g`` form a maximal ``delta**g``-separated net and the
nets are nested: every center of generation ``g`` is also a center of
generation ``g + 1``.  Each finer center is attached to a coarser one, which
gives a tree whose leaves are the points themselves; a cube is the set of
leaves below its center.

The stored levels are ``m, m+1, ..., k``.  Generations ``[m, k)`` carry Haar
functions, the level ``k`` supplies their children.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import _backend
from .errors import DeltaTooLarge, EmptySpace, GenerationOutOfRange, UnknownPoint
from .space import PointSpace, ValidationReport


def c_small(A0: float) -> float:
    return 1.0 / (3.0 * A0 ** 2)


def c_big(A0: float) -> float:
    return 2.0 * A0


def default_delta(A0: float) -> float:
    """Largest power of 1/2 not exceeding min(1/(96 A0^6), 1/8)."""
    target = min(1.0 / (96.0 * A0 ** 6), 1.0 / 8.0)
    return 2.0 ** math.floor(math.log2(target))


@dataclass
class Cube:
    id: int
    gen: int
    center: int  # point index
    members: np.ndarray  # sorted point indices
    parent: int = -1
    children: list = field(default_factory=list)


class DyadicSystem:
    def __init__(self, space: PointSpace, delta: float, m: int, k: int, cubes: list,
                 seed=None):
        self.space = space
        self.delta = float(delta)
        self.m = int(m)
        self.k = int(k)
        self.cubes = cubes
        self.seed = seed
        self.A0 = space.A0
        self.c_Q = c_small(space.A0)
        self.C_Q = c_big(space.A0)
        levels = {g: [] for g in range(self.m, self.k + 1)}
        for c in cubes:
            levels.setdefault(c.gen, []).append(c.id)
        self.levels = levels
        n = space.n
        self.label = {}
        for g, ids in levels.items():
            lab = np.full(n, -1, dtype=np.int64)
            for cid in ids:
                lab[cubes[cid].members] = cid
            self.label[g] = lab

    # geometry -----------------------------------------------------------
    def side(self, gen) -> float:
        return self.delta ** gen

    @property
    def generations(self):
        return range(self.m, self.k)

    @cached_property
    def gen_of(self) -> np.ndarray:
        return np.array([c.gen for c in self.cubes], dtype=np.int64)

    @cached_property
    def ell(self) -> np.ndarray:
        return self.delta ** self.gen_of.astype(float)

    @cached_property
    def center_of(self) -> np.ndarray:
        return np.array([c.center for c in self.cubes], dtype=np.int64)

    @cached_property
    def mass(self) -> np.ndarray:
        w = self.space.weights
        return np.array([w[c.members].sum() for c in self.cubes])

    @cached_property
    def indicator(self) -> np.ndarray:
        """Dense (ncubes, n) 0/1 matrix of cube membership."""
        out = np.zeros((len(self.cubes), self.space.n))
        for c in self.cubes:
            out[c.id, c.members] = 1.0
        return out

    def cube(self, cid) -> Cube:
        return self.cubes[cid]

    def ancestor(self, cid: int, gen: int) -> int:
        c = self.cubes[cid]
        if gen > c.gen:
            raise GenerationOutOfRange(gen)
        while c.gen > gen:
            if c.parent < 0:
                raise GenerationOutOfRange(gen)
            c = self.cubes[c.parent]
        return c.id

    def is_ancestor(self, anc: int, cid: int) -> bool:
        a = self.cubes[anc]
        c = self.cubes[cid]
        if a.gen > c.gen:
            return False
        return self.ancestor(cid, a.gen) == anc

    def sandwich_radius(self, cid: int, dilation: float = 1.0) -> float:
        return dilation * self.C_Q * self.ell[cid]

    def ball_mask(self, cid: int, dilation: float = 1.0) -> np.ndarray:
        """Members of B(x_Q, dilation * C_Q * ell(Q))."""
        c = self.cubes[cid]
        return self.space.rho[c.center] < dilation * self.C_Q * self.ell[cid]

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        ids = self.space.ids
        return {
            "delta": self.delta,
            "m": self.m,
            "k": self.k,
            "cubes": [
                {"id": c.id, "gen": c.gen, "center": _plain(ids[c.center]),
                 "members": [_plain(ids[i]) for i in c.members], "parent": c.parent}
                for c in self.cubes
            ],
        }

    @classmethod
    def from_dict(cls, space: PointSpace, d: dict) -> "DyadicSystem":
        cubes = []
        for e in sorted(d["cubes"], key=lambda e: e["id"]):
            mem = np.array(sorted(space.idx(p) for p in e["members"]), dtype=np.int64)
            cubes.append(Cube(int(e["id"]), int(e["gen"]), space.idx(e["center"]), mem,
                              int(e["parent"])))
        for c in cubes:
            if c.parent >= 0:
                cubes[c.parent].children.append(c.id)
        return cls(space, d["delta"], d["m"], d["k"], cubes)


def _plain(x):
    return int(x) if isinstance(x, np.integer) else x


def _resolution_gen(space: PointSpace, delta: float) -> int:
    """Smallest generation at which every point is a center."""
    dmin = space.min_positive_distance
    g = int(math.ceil(math.log(dmin) / math.log(delta)))
    while delta ** g > dmin:
        g += 1
    while g > -10**6 and delta ** (g - 1) <= dmin:
        g -= 1
    return g


def build_system(space: PointSpace, delta: Optional[float] = None, m: int = 0, k: int = 3,
                 seed: int = 0, parent_rule: str = "random") -> DyadicSystem:
    """Random dyadic system with stored levels ``m..k``.

    ``parent_rule`` is ``"random"`` (forced parent when one is closer than
    delta^g/(2 A0), otherwise uniform among centers closer than delta^g) or
    ``"nearest"`` (nearest coarser center, ties by point index).
    """
    if space.n == 0:
        raise EmptySpace("no points")
    A0 = space.A0
    if delta is None:
        delta = default_delta(A0)
    if not (0 < delta < 1) or 96.0 * A0 ** 6 * delta > 1.0 + 1e-15:
        raise DeltaTooLarge(f"96*A0^6*delta = {96.0 * A0 ** 6 * delta} > 1")
    if not m < k:
        raise ValueError("need m < k")
    n = space.n
    rho = space.rho
    top = max(k, _resolution_gen(space, delta)) if n > 1 else k
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(top - m + 1)]

    centers = {}
    parent_of = {}  # gen -> array, index into centers[gen-1]
    mind = np.full(n, np.inf)
    is_center = np.zeros(n, dtype=bool)
    for li, g in enumerate(range(m, top + 1)):
        rng = streams[li]
        sep = delta ** g
        prev = centers.get(g - 1, np.zeros(0, dtype=np.int64))
        order = rng.permutation(np.flatnonzero(~is_center)).astype(np.int64)
        new = _backend.greedy_net(rho, order, sep, mind)
        cur = np.concatenate([prev, new])
        is_center[new] = True
        centers[g] = cur
        if g > m:
            par = np.empty(cur.size, dtype=np.int64)
            par[: prev.size] = np.arange(prev.size)
            if new.size:
                D = rho[np.ix_(new, prev)]
                scale = delta ** (g - 1)
                for i in range(new.size):
                    d = D[i]
                    if parent_rule == "nearest":
                        par[prev.size + i] = int(np.argmin(d))
                        continue
                    forced = np.flatnonzero(d < scale / (2.0 * A0))
                    if forced.size:
                        par[prev.size + i] = int(forced[0])
                    else:
                        adm = np.flatnonzero(d < scale)
                        if adm.size == 0:  # cannot happen for a maximal net
                            adm = np.array([int(np.argmin(d))])
                        par[prev.size + i] = int(adm[rng.integers(adm.size)])
            parent_of[g] = par

    # leaves: at generation ``top`` every point is a center
    lab = np.empty(n, dtype=np.int64)
    lab[centers[top]] = np.arange(centers[top].size)
    labels = {top: lab}
    for g in range(top, m, -1):
        labels[g - 1] = parent_of[g][labels[g]]

    cubes = []
    gid = {}
    for g in range(m, k + 1):
        lab = labels[g]
        order = np.argsort(lab, kind="stable")
        sl = lab[order]
        starts = np.flatnonzero(np.r_[True, sl[1:] != sl[:-1]])
        ends = np.r_[starts[1:], sl.size]
        for s, e in zip(starts, ends):
            local = int(sl[s])
            cid = len(cubes)
            gid[(g, local)] = cid
            parent = -1
            if g > m:
                parent = gid[(g - 1, int(parent_of[g][local]))]
                cubes[parent].children.append(cid)
            cubes.append(Cube(cid, g, int(centers[g][local]), np.sort(order[s:e]), parent))
    return DyadicSystem(space, delta, m, k, cubes, seed=seed)


def containing_cube(sys: DyadicSystem, point, generation: int) -> int:
    if generation not in sys.label:
        raise GenerationOutOfRange(generation)
    try:
        i = sys.space.index[point]
    except KeyError:
        raise UnknownPoint(point) from None
    return int(sys.label[generation][i])


def doubling_estimate(sys: DyadicSystem) -> int:
    """Upper bound M for the number of children of any cube.

    Children centers of Q are delta^(g+1)-separated points in B(x_Q, C_Q delta^g);
    their number is at most the size of any covering of that ball by balls of
    radius delta^(g+1)/(2 A0), and a greedy net at that separation is one.
    """
    rho = sys.space.rho
    A0 = sys.A0
    best = 1
    for c in sys.cubes:
        if c.gen >= sys.k or len(c.members) < 2:
            continue
        g = c.gen
        ball = np.flatnonzero(rho[c.center] < sys.C_Q * sys.delta ** g)
        if ball.size <= best:
            continue
        sub = np.ascontiguousarray(rho[np.ix_(ball, ball)])
        net = _backend.greedy_net(sub, np.arange(ball.size, dtype=np.int64),
                                  sys.delta ** (g + 1) / (2.0 * A0), np.full(ball.size, np.inf))
        best = max(best, int(net.size))
    return best


def check_axioms(sys: DyadicSystem, space: Optional[PointSpace] = None,
                 M: Optional[int] = None, max_witnesses: int = 5,
                 rtol: float = 1e-12) -> ValidationReport:
    """Verify the dyadic-system properties from the cubes' member lists alone."""
    space = sys.space if space is None else space
    rep = ValidationReport()
    n = space.n
    rho = space.rho
    ids = space.ids
    by_gen = {}
    for c in sys.cubes:
        by_gen.setdefault(c.gen, []).append(c)
    members = {c.id: set(int(i) for i in c.members) for c in sys.cubes}

    def add(kind, wit, detail=""):
        if sum(1 for v in rep.violations if v.kind == kind) < max_witnesses:
            rep.add(kind, wit, detail)

    for g in range(sys.m, sys.k + 1):
        cubes = by_gen.get(g, [])
        count = np.zeros(n, dtype=np.int64)
        for c in cubes:
            count[np.asarray(c.members, dtype=np.int64)] += 1
        for i in np.flatnonzero(count != 1):
            add("partition", (g, ids[i]), f"point covered {count[i]} times")
        ell = sys.delta ** g
        cen = np.array([c.center for c in cubes], dtype=np.int64)
        if cen.size > 1:
            D = rho[np.ix_(cen, cen)] + np.diag(np.full(cen.size, np.inf))
            for a, b in np.argwhere(np.triu(D < ell * (1 - rtol), 1)):
                add("center_separation", (g, cubes[a].id, cubes[b].id), f"rho={D[a, b]}")
        if cen.size:
            near = rho[cen].min(axis=0)
            for i in np.flatnonzero(near >= ell):
                add("center_covering", (g, ids[i]), f"nearest center at {near[i]}")
        for c in cubes:
            mem = np.asarray(c.members, dtype=np.int64)
            if c.center not in members[c.id]:
                add("center_in_cube", (g, c.id), "")
            d = rho[c.center]
            outside = mem[d[mem] >= sys.C_Q * ell]
            for i in outside[:1]:
                add("sandwich_outer", (g, c.id, ids[i]), f"rho={d[i]}")
            inner = np.flatnonzero(d < sys.c_Q * ell)
            missing = [i for i in inner if i not in members[c.id]]
            for i in missing[:1]:
                add("sandwich_inner", (g, c.id, ids[i]), f"rho={d[i]}")

    # per-generation point labels derived from the member lists
    point_label = {}
    for g in range(sys.m, sys.k + 1):
        lab = np.full(n, -1, dtype=np.int64)
        for q in by_gen.get(g, []):
            lab[np.asarray(q.members, dtype=np.int64)] = q.id
        point_label[g] = lab
    cube_by_id = {c.id: c for c in sys.cubes}
    kids_of = {}
    for c in sys.cubes:
        kids_of.setdefault(c.parent, []).append(c)
    for c in sys.cubes:
        mem = np.asarray(c.members, dtype=np.int64)
        for g2 in range(sys.m, c.gen):
            hits = np.unique(point_label[g2][mem]) if mem.size else np.zeros(0, np.int64)
            if hits.size != 1 or hits[0] < 0 or not members[c.id] <= members[int(hits[0])]:
                add("unique_ancestor", (c.gen, c.id, g2), f"{hits.size} intersecting cubes")
        if c.gen == sys.m:
            continue
        p = cube_by_id.get(c.parent)
        if p is None or p.gen != c.gen - 1:
            add("nesting", (c.gen, c.id), "missing parent at previous generation")
            continue
        if not members[c.id] <= members[p.id]:
            add("nesting", (c.gen, c.id, p.id), "cube not inside its parent")
        ball_c = rho[c.center] < sys.C_Q * sys.delta ** c.gen
        ball_p = rho[p.center] < sys.C_Q * sys.delta ** p.gen
        if np.any(ball_c & ~ball_p):
            add("ball_nesting", (c.gen, c.id, p.id), "")

    if M is None:
        M = doubling_estimate(sys)
    for c in sys.cubes:
        if c.gen < sys.k:
            kids = kids_of.get(c.id, [])
            if len(kids) > M:
                add("child_count", (c.gen, c.id), f"{len(kids)} > M={M}")
            union = set().union(*(members[q.id] for q in kids)) if kids else set()
            if union != members[c.id]:
                add("children_union", (c.gen, c.id), "")
    return rep
