"""Good and bad cubes relative to an independent grid, and the shift map.

A cube ``Q`` of ``D`` is bad when some ``Q'`` of ``D'`` with
``ell(Q) <= delta**r * ell(Q')`` has both ``rho(Q, Q')`` and
``rho(Q, X \\ Q')`` at most ``delta * C * ell(Q)**gamma * ell(Q')**(1-gamma)``.
Set distances are minima over member pairs; the distance to an empty set is
``inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import _backend
from .dyadic import DyadicSystem, build_system
from .errors import MismatchedDelta
from .haar import HaarBasis, ProductCoefficients


@dataclass(frozen=True)
class GoodnessParams:
    r: int
    gamma: float
    C_script: float

    def __post_init__(self):
        if not (0 < self.gamma < 1):
            raise ValueError("gamma must lie in (0, 1)")
        if not self.C_script > 0:
            raise ValueError("C_script must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")

    @classmethod
    def from_constants(cls, r: int, alpha: float, t_lambda: float, A0: float = 1.0,
                       C_K: float = 1.0) -> "GoodnessParams":
        gamma = alpha / (2.0 * (alpha + t_lambda))
        C_Q = 2.0 * A0
        return cls(int(r), gamma, 2.0 * A0 * C_Q * C_K)

    def with_r(self, r: int) -> "GoodnessParams":
        return GoodnessParams(int(r), self.gamma, self.C_script)

    def threshold(self, ell, ell_prime, delta: float, with_delta: bool = True):
        f = delta if with_delta else 1.0
        return f * self.C_script * np.asarray(ell) ** self.gamma * np.asarray(ell_prime) ** (1 - self.gamma)


def _local(sys: DyadicSystem, g: int):
    ids = np.asarray(sys.levels[g], dtype=np.int64)
    pos = np.full(len(sys.cubes), -1, dtype=np.int64)
    pos[ids] = np.arange(ids.size)
    return pos[sys.label[g]], ids


def cube_distances(sysA: DyadicSystem, sysB: DyadicSystem):
    """Set distances rho(Q, Q') and rho(Q, X \\ Q') for every Q in A and Q' in B.

    Both are dense (len(A.cubes), len(B.cubes)) arrays.
    """
    rho = sysA.space.rho
    nA, nB = len(sysA.cubes), len(sysB.cubes)
    d_in = np.full((nA, nB), np.inf)
    d_out = np.full((nA, nB), np.inf)
    for g in sysA.levels:
        labA, idsA = _local(sysA, g)
        cp = _backend.cube_point_mindist(rho, labA, idsA.size)
        for g2 in sysB.levels:
            labB, idsB = _local(sysB, g2)
            dm = _backend.group_min_cols(cp, labB, idsB.size)
            d_in[np.ix_(idsA, idsB)] = dm
            d_out[np.ix_(idsA, idsB)] = _complement_min(dm)
    return d_in, d_out


def _complement_min(dm: np.ndarray) -> np.ndarray:
    """out[i, j] = min over columns other than j of dm[i, :]."""
    if dm.shape[1] == 1:
        return np.full_like(dm, np.inf)
    part = np.partition(dm, 1, axis=1)
    first, second = part[:, :1], part[:, 1:2]
    arg = np.argmin(dm, axis=1)
    out = np.broadcast_to(first, dm.shape).copy()
    out[np.arange(dm.shape[0]), arg] = second[:, 0]
    return out


def _check_pair(sysD: DyadicSystem, sysDp: DyadicSystem):
    if abs(sysD.delta - sysDp.delta) > 1e-15 * max(sysD.delta, 1.0):
        raise MismatchedDelta(f"{sysD.delta} != {sysDp.delta}")
    if sysD.space is not sysDp.space and sysD.space.n != sysDp.space.n:
        raise ValueError("systems over different spaces")


@dataclass
class GoodnessMask:
    good: np.ndarray  # bool per cube of D
    params: GoodnessParams

    def __getitem__(self, cid):
        return bool(self.good[cid])

    @property
    def bad(self) -> np.ndarray:
        return ~self.good


def classify(sysD: DyadicSystem, sysDp: DyadicSystem, params: GoodnessParams,
             distances=None) -> GoodnessMask:
    _check_pair(sysD, sysDp)
    d_in, d_out = cube_distances(sysD, sysDp) if distances is None else distances
    ell = sysD.ell[:, None]
    ellp = sysDp.ell[None, :]
    scale_ok = ell <= sysD.delta ** params.r * ellp * (1 + 1e-12)
    thr = params.threshold(ell, ellp, sysD.delta)
    bad = np.any(scale_ok & (d_in <= thr) & (d_out <= thr), axis=1)
    return GoodnessMask(~bad, params)


def trial_seed(seed: int, t: int) -> int:
    """Seed of the t-th random comparison grid in a Monte-Carlo run."""
    return int(np.random.SeedSequence([int(seed), int(t)]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class BadnessResult:
    freq: np.ndarray  # per cube of the fixed grid
    trials: int
    r: int

    @property
    def mean(self) -> float:
        return float(self.freq.mean())

    @property
    def stderr(self) -> float:
        """Standard error of the mean cube badness over trials."""
        per_trial = self._per_trial
        if per_trial.size < 2:
            return 0.0
        return float(per_trial.std(ddof=1) / math.sqrt(per_trial.size))

    _per_trial: np.ndarray = None


def badness_probability(space, delta, m, k, params: GoodnessParams, trials: int, seed: int,
                        sysD: Optional[DyadicSystem] = None, r_values=None):
    """Empirical frequency of D'-badness for each cube of a fixed grid D.

    The fixed grid is built from ``seed`` unless given; trial ``t`` uses the
    grid built from ``trial_seed(seed, t)``.  When ``r_values`` is given, a
    dict r -> BadnessResult is returned, all computed from the same trial grids.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sysD is None:
        sysD = build_system(space, delta, m, k, seed=seed)
    rs = [params.r] if r_values is None else list(r_values)
    counts = {r: np.zeros(len(sysD.cubes)) for r in rs}
    per_trial = {r: [] for r in rs}
    for t in range(trials):
        sysDp = build_system(space, delta, m, k, seed=trial_seed(seed, t))
        dist = cube_distances(sysD, sysDp)
        for r in rs:
            bad = classify(sysD, sysDp, params.with_r(r), distances=dist).bad
            counts[r] += bad
            per_trial[r].append(bad.mean())
    out = {r: BadnessResult(counts[r] / trials, trials, r, np.array(per_trial[r])) for r in rs}
    return out if r_values is not None else out[params.r]


def calibrate_r(space, delta, m, k, params: GoodnessParams, trials: int, seed: int,
                target: float = 0.1, r_max: int = 6) -> int:
    """Smallest r with mean empirical badness below ``target``."""
    res = badness_probability(space, delta, m, k, params, trials, seed,
                              r_values=range(0, r_max + 1))
    for r in range(r_max + 1):
        if res[r].mean < target:
            return r
    return r_max


def split_good_bad(c: ProductCoefficients, mask1: GoodnessMask, mask2: GoodnessMask):
    """(good part, bad part): good keeps rectangles whose two cubes are both good."""
    g1 = mask1.good[c.basis1.row_cube[c.rows1]]
    g2 = mask2.good[c.basis2.row_cube[c.rows2]]
    keep = g1[:, None] & g2[None, :]
    return c.like(np.where(keep, c.values, 0.0)), c.like(np.where(keep, 0.0, c.values))


# frames: the small grid together with its container grid ---------------------

class Frame:
    """One factor of the product machinery.

    ``basis`` lives on the small grid ``D``; ``container`` is the grid ``D'``
    that supplies ``S(Q)``, the ``D'`` cube of generation ``gen(Q) - r``
    containing a good cube ``Q``.  Eligible rows are the cancellative Haar
    rows (u >= 1) of good positive-mass cubes for which ``S(Q)`` exists,
    i.e. ``gen(Q) - r`` is a stored generation of ``D'``.
    """

    def __init__(self, basis: HaarBasis, container: DyadicSystem, params: GoodnessParams,
                 mask: Optional[GoodnessMask] = None, u: Optional[int] = None):
        sys = basis.sys
        _check_pair(sys, container)
        self.basis = basis
        self.sys = sys
        self.container = container
        self.params = params
        self.mask = classify(sys, container, params) if mask is None else mask
        r = params.r
        cubes = basis.row_cube
        gens = basis.row_gen
        ok = (basis.row_u >= 1) & self.mask.good[cubes] & (gens - r >= container.m)
        if u is not None:
            ok &= basis.row_u == u
        self.rows = np.flatnonzero(ok)
        cont = np.empty(self.rows.size, dtype=np.int64)
        for i, row in enumerate(self.rows):
            q = sys.cubes[int(cubes[row])]
            g2 = q.gen - r
            cand = container.label[g2][q.members]
            if np.any(cand != cand[0]):
                raise AssertionError("good cube is not inside a single container")
            cont[i] = cand[0]
        self.container_of_row = cont
        self.containers, self.row_cont_pos = np.unique(cont, return_inverse=True)

    @property
    def n_rows(self) -> int:
        return self.rows.size

    @property
    def space(self):
        return self.sys.space

    @cached_property
    def H(self) -> np.ndarray:
        return self.basis.H[self.rows]

    @cached_property
    def cont_mass(self) -> np.ndarray:
        return self.container.mass[self.containers]

    @cached_property
    def cont_indicator(self) -> np.ndarray:
        return self.container.indicator[self.containers]

    @cached_property
    def E(self) -> np.ndarray:
        """Rows chi_{S(Q)} / mu(S(Q)) per eligible row (zero for zero-mass containers)."""
        ind = self.cont_indicator[self.row_cont_pos]
        m = self.cont_mass[self.row_cont_pos]
        with np.errstate(divide="ignore"):
            inv = np.where(m > 0, 1.0 / m, 0.0)
        return ind * inv[:, None]

    @cached_property
    def row_to_container(self) -> np.ndarray:
        """(n_containers, n_rows) 0/1 matrix: container of each row."""
        out = np.zeros((self.containers.size, self.rows.size))
        out[self.row_cont_pos, np.arange(self.rows.size)] = 1.0
        return out

    def cube_of_row(self) -> np.ndarray:
        return self.basis.row_cube[self.rows]
