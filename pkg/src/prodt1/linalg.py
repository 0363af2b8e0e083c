"""Operator norms on weighted L2 spaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def weighted_matrix(M, w_out, w_in) -> np.ndarray:
    """Matrix of f -> M (f * w_in) from L2(w_in) to L2(w_out) in orthonormal coordinates.

    ``M`` acts on pointwise values with the input weights already applied
    by the caller's convention ``(Tf)(x) = sum_y M[x, y] f(y) w_in(y)``.
    Zero-weight points drop out of both spaces.
    """
    so = np.sqrt(np.asarray(w_out, float))
    si = np.sqrt(np.asarray(w_in, float))
    return so[:, None] * np.asarray(M, float) * si[None, :]


def spectral_norm(A) -> float:
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


@dataclass
class PowerResult:
    value: float
    iterations: int
    converged: bool


def power_norm(matvec: Callable, rmatvec: Callable, n: int, max_iters: int = 500,
               tol: float = 1e-10, seed: int = 0, x0: Optional[np.ndarray] = None) -> PowerResult:
    """Largest singular value of a linear map via power iteration on A^T A.

    The iterate is in orthonormal coordinates; ``tol`` is relative.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n) if x0 is None else np.array(x0, float)
    nx = np.linalg.norm(x)
    if n == 0 or nx == 0:
        return PowerResult(0.0, 0, True)
    x /= nx
    est = 0.0
    for it in range(1, max_iters + 1):
        y = matvec(x)
        z = rmatvec(y)
        nz = np.linalg.norm(z)
        if nz == 0:
            return PowerResult(0.0, it, True)
        new = float(np.sqrt(nz))
        x = z / nz
        if abs(new - est) <= tol * max(new, 1e-300):
            return PowerResult(new, it, True)
        est = new
    return PowerResult(est, max_iters, False)


def matrix_power_norm(A, max_iters: int = 500, tol: float = 1e-10, seed: int = 0,
                      block: int = 4) -> PowerResult:
    """Block power iteration on A^T A with a Rayleigh-Ritz step.

    A block keeps convergence fast when the top singular values nearly coincide.
    """
    A = np.asarray(A, float)
    n = A.shape[1] if A.ndim == 2 else 0
    if n == 0 or not A.any():
        return PowerResult(0.0, 0, True)
    b = min(block, n)
    X, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, b)))
    est = 0.0
    for it in range(1, max_iters + 1):
        Z = A.T @ (A @ X)
        X, _ = np.linalg.qr(Z)
        H = X.T @ (A.T @ (A @ X))
        vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
        new = float(np.sqrt(max(vals[-1], 0.0)))
        X = X @ vecs[:, ::-1]
        if abs(new - est) <= tol * max(new, 1e-300):
            return PowerResult(new, it, True)
        est = new
    return PowerResult(est, max_iters, False)


def psd_sqrt(G) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix."""
    G = 0.5 * (np.asarray(G, float) + np.asarray(G, float).T)
    if G.size == 0:
        return G
    vals, vecs = np.linalg.eigh(G)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
