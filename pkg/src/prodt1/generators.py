"""Random finite spaces and measures used by tests, experiments and the CLI."""
from __future__ import annotations

import numpy as np

from .space import PointSpace, from_coords, from_table


def _weights(n, kind, rng):
    if kind == "unit":
        return np.ones(n)
    if kind == "uniform":
        return np.full(n, 1.0 / n)
    if kind == "random":
        w = rng.uniform(0.5, 1.5, n)
        return w / w.sum()
    if kind == "sparse":
        w = rng.uniform(0.5, 1.5, n)
        w[rng.random(n) < 0.2] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
        return w / w.sum()
    raise ValueError(f"unknown weight kind {kind!r}")


def uniform_space(n: int, dim: int = 2, seed: int = 0, metric: str = "euclidean",
                  weights: str = "uniform") -> PointSpace:
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    return from_coords(pts, _weights(n, weights, rng), metric=metric)


def shell_space(n: int, dim: int = 2, seed: int = 0, weights: str = "uniform") -> PointSpace:
    """Points on concentric spheres of radii 2^-j."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rad = 2.0 ** -rng.integers(0, 6, n)
    return from_coords(v * rad[:, None], _weights(n, weights, rng))


def multiscale_space(levels: int = 3, branching: int = 4, ratio: float = 1.0 / 128,
                     dim: int = 2, seed: int = 0, weights: str = "uniform",
                     metric: str = "euclidean") -> PointSpace:
    """Hierarchical clusters: each point is a sum of offsets of size ratio^j.

    With ``ratio`` equal to the grid parameter every generation of a random
    dyadic system carries nontrivial splitting.
    """
    rng = np.random.default_rng(seed)
    pts = np.zeros((1, dim))
    for j in range(levels):
        offs = rng.uniform(-1.0, 1.0, (pts.shape[0], branching, dim)) * ratio ** j
        pts = (pts[:, None, :] + offs).reshape(-1, dim)
    n = pts.shape[0]
    return from_coords(pts, _weights(n, weights, rng), metric=metric)


def snowflake_space(n: int, power: float = 2.0, dim: int = 2, seed: int = 0,
                    weights: str = "uniform") -> PointSpace:
    """|x - y|^power: a quasimetric with constant 2^(power - 1)."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1) ** power
    return from_table(d, _weights(n, weights, rng), A0=2.0 ** (power - 1), coords=pts)


def random_space(kind: str, seed: int, **kw) -> PointSpace:
    fn = {"uniform": uniform_space, "shell": shell_space, "multiscale": multiscale_space,
          "snowflake": snowflake_space}.get(kind)
    if fn is None:
        raise ValueError(f"unknown space kind {kind!r}")
    return fn(seed=seed, **kw)


# bidisc measures -------------------------------------------------------------

def bidisc_measure(n: int, seed: int = 0, kind: str = "random", max_radius: float = 0.9):
    """(points, masses) with points as an (n, 2) complex array inside D x D."""
    rng = np.random.default_rng(seed)
    if kind == "random":
        r = max_radius * np.sqrt(rng.random((n, 2)))
    elif kind == "boundary":
        r = 1.0 - (1.0 - max_radius) * rng.random((n, 2)) ** 2
        r = np.minimum(r, max_radius + (1 - max_radius) * 0.5)
    else:
        raise ValueError(f"unknown bidisc measure kind {kind!r}")
    th = rng.uniform(0, 2 * np.pi, (n, 2))
    z = r * np.exp(1j * th)
    m = rng.uniform(0.1, 1.0, n)
    return z, m / m.sum()
