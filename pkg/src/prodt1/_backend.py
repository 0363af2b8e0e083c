"""Selects the compiled kernels when the extension is importable.

``use_backend("python")`` forces the numpy fallback, ``use_backend("compiled")``
switches back (raising ImportError when the extension was not built).
"""
import numpy as np

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _fallback


def name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def compiled_available():
    return _compiled is not None


def use_backend(which):
    global _active
    if which == "python":
        _active = _fallback
    elif which == "compiled":
        if _compiled is None:
            raise ImportError("compiled core is not available")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {which!r}")


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def greedy_net(rho, order, sep, mind):
    if _active is _fallback:
        return _fallback.greedy_net(rho, order, sep, mind)
    if not (mind.flags.c_contiguous and mind.dtype == np.float64):
        raise TypeError("mind must be a contiguous float64 array")
    return _compiled.greedy_net(_c(rho), _c(order, np.int64), float(sep), mind)


def cube_point_mindist(rho, labels, ncubes):
    if _active is _fallback:
        return _fallback.cube_point_mindist(rho, np.asarray(labels), ncubes)
    return _compiled.cube_point_mindist(_c(rho), _c(labels, np.int64), int(ncubes))


def group_min_cols(dist, labels, ngroups):
    if _active is _fallback:
        return _fallback.group_min_cols(dist, np.asarray(labels), ngroups)
    return _compiled.group_min_cols(_c(dist), _c(labels, np.int64), int(ngroups))


def minplus(rho):
    if _active is _fallback:
        return _fallback.minplus(rho)
    return _compiled.minplus(_c(rho))


def schur_sep(dist, ell_r, ell_c, mu_r, mu_c, lam, alpha, thresh):
    if _active is _fallback:
        return _fallback.schur_sep(dist, ell_r, ell_c, mu_r, mu_c, lam, alpha, thresh)
    return _compiled.schur_sep(_c(dist), _c(ell_r), _c(ell_c), _c(mu_r), _c(mu_c),
                               _c(lam), float(alpha), _c(thresh))
