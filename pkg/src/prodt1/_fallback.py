"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_core.pyx``.
"""
import numpy as np


def greedy_net(rho, order, sep, mind):
    """Greedy maximal ``sep``-separated net.

    ``mind`` holds, for every point, the distance to the nearest center
    chosen so far (``inf`` when there is none); it is updated in place.
    Returns the newly selected point indices in selection order.
    """
    chosen = []
    for p in order:
        if mind[p] >= sep:
            chosen.append(int(p))
            np.minimum(mind, rho[p], out=mind)
    return np.asarray(chosen, dtype=np.int64)


def cube_point_mindist(rho, labels, ncubes):
    """Row ``c`` is the distance from cube ``c`` (points with label c) to every point."""
    n = rho.shape[0]
    out = np.full((ncubes, n), np.inf)
    order = np.argsort(labels, kind="stable")
    lab = labels[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    mins = np.minimum.reduceat(rho[order], starts, axis=0)
    out[lab[starts]] = mins
    return out


def group_min_cols(dist, labels, ngroups):
    """Column-grouped minimum: out[i, g] = min over columns j with labels[j] == g."""
    rows = dist.shape[0]
    out = np.full((rows, ngroups), np.inf)
    if dist.shape[1] == 0:
        return out
    order = np.argsort(labels, kind="stable")
    lab = labels[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    mins = np.minimum.reduceat(dist[:, order], starts, axis=1)
    out[:, lab[starts]] = mins
    return out


def minplus(rho):
    """Min-plus square of ``rho`` and the argmin intermediate point."""
    n = rho.shape[0]
    best = np.full((n, n), np.inf)
    arg = np.zeros((n, n), dtype=np.int64)
    for y in range(n):
        cand = rho[:, y][:, None] + rho[y, :][None, :]
        better = cand < best
        best[better] = cand[better]
        arg[better] = y
    return best, arg


def schur_sep(dist, ell_r, ell_c, mu_r, mu_c, lam, alpha, thresh):
    """Entries of the separated-pair Schur matrix.

    ``dist`` are set distances, ``lam`` the sup of the dominating function
    over the row cube at radius ``dist`` and ``thresh`` the separation
    threshold per entry.  Pairs that are not separated, or with
    ``ell_r > ell_c``, get zero.
    """
    er = ell_r[:, None]
    ec = ell_c[None, :]
    mask = (er <= ec) & (dist > thresh)
    D = er + ec + dist
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (er * ec) ** (alpha / 2.0) / (D ** alpha * lam)
        val = val * np.sqrt(mu_r)[:, None] * np.sqrt(mu_c)[None, :]
    return np.where(mask & np.isfinite(val), val, 0.0)
