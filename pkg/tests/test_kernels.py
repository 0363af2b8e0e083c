import json

import numpy as np
import pytest

from prodt1 import fit_power_dominating, from_coords, power_dominating
from prodt1.generators import uniform_space
from prodt1.kernels import (ADJOINTS, KernelOperator, KernelSpec, apply, dense_norm,
                            operator_norm, product_kernel, riesz_factor, size_factor,
                            table_kernel, truncated, validate_assumptions)


@pytest.fixture(scope="module")
def spaces():
    s1 = uniform_space(9, seed=1, weights="random")
    s2 = uniform_space(7, seed=2, weights="random")
    return s1, s2, fit_power_dominating(s1, 2.0), fit_power_dominating(s2, 2.0)


def _dense_by_loops(T):
    """Independent assembly of the weighted action f -> sum_y K(x, y) f(y) mu(y)."""
    s1, s2 = T.s1, T.s2
    tau = 0.0 if T.tau is None else T.tau
    n1, n2 = s1.n, s2.n
    M = np.zeros((n1 * n2, n1 * n2))
    for x1 in range(n1):
        for x2 in range(n2):
            for y1 in range(n1):
                for y2 in range(n2):
                    if s1.rho[x1, y1] > tau and s2.rho[x2, y2] > tau:
                        M[x1 * n2 + x2, y1 * n2 + y2] = (T.spec.evaluate(x1, x2, y1, y2)
                                                         * s1.weights[y1] * s2.weights[y2])
    return M


def test_zero_kernel(spaces):
    s1, s2, d1, d2 = spaces
    K = table_kernel(np.zeros((9, 7, 9, 7)))
    T = KernelOperator(K, s1, s2)
    assert not T.apply(np.ones((9, 7))).any()
    assert operator_norm(T).value == 0.0
    rep, fit = validate_assumptions(K, s1, s2, d1, d2, samples=1000)
    assert rep.ok and fit is None


def test_size_factor_equality(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    lam1 = d1(np.arange(9)[:, None], s1.rho)
    off = s1.rho > 0
    np.testing.assert_allclose(K.factors[0][off] * lam1[off], 1.0, rtol=1e-14)
    rep, _ = validate_assumptions(K, s1, s2, d1, d2, samples=10_000, seed=3)
    assert rep.ok, rep.to_dict()[:3]


def test_valid_riesz_product(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(riesz_factor(s1, d1, direction=[1, 1]), size_factor(s2, d2))
    rep, fit = validate_assumptions(K, s1, s2, d1, d2, samples=10_000, seed=4)
    assert rep.ok
    assert set(fit) == {"factor1", "factor2"} and all(v >= 0 for v in fit.values())


def test_riesz_antisymmetric(spaces):
    s1, _, d1, _ = spaces
    f = riesz_factor(s1, power_dominating(2.0, 3.0))
    np.testing.assert_allclose(f.K, -f.K.T, atol=1e-12)
    with pytest.raises(ValueError):
        riesz_factor(from_coords([0.0, 1.0]).__class__((0, 1), None, np.array([[0, 1], [1, 0.]]),
                                                         np.ones(2)), d1)


def test_injected_size_fault(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    tab = K.dense_table()
    tab[1, 2, 4, 5] *= 2.0
    bad = table_kernel(tab, C=1.0)  # size constant of the factors
    rep, _ = validate_assumptions(bad, s1, s2, d1, d2, samples=100)
    wit = [v.witness for v in rep if v.kind == "size:T"]
    assert (1, 2, 4, 5) in [w[:4] for w in wit]
    # the same entry appears in each adjoint with permuted indices
    assert any(v.kind == "size:T*" and v.witness[:4] == (4, 5, 1, 2) for v in rep)


def test_truncation_beyond_diameter(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    T = truncated(K, s1, s2, tau=10.0)
    assert not T.apply(np.ones((9, 7))).any()
    assert dense_norm(T) == 0.0
    with pytest.raises(ValueError):
        KernelOperator(K, s1, s2, tau=0.0)


def test_point_mass_input(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    T = KernelOperator(K, s1, s2)
    f = np.zeros((9, 7))
    f[3, 4] = 1.0
    out = apply(T, f)
    A, B = K.factors
    expect = np.outer(A[:, 3], B[:, 4]) * s1.weights[3] * s2.weights[4]
    expect[3, :] = 0.0
    expect[:, 4] = 0.0
    np.testing.assert_allclose(out, expect, rtol=1e-14)


@pytest.mark.parametrize("tau", [None, 0.2, 0.5])
def test_apply_matches_loop_matrix(spaces, tau):
    s1, s2, d1, d2 = spaces
    rng = np.random.default_rng(5)
    for K in (product_kernel(size_factor(s1, d1), riesz_factor(s2, d2)),
              table_kernel(rng.normal(size=(9, 7, 9, 7)))):
        T = KernelOperator(K, s1, s2, tau)
        M = _dense_by_loops(T)
        f = rng.normal(size=(9, 7))
        np.testing.assert_allclose(T.apply(f).ravel(), M @ f.ravel(), rtol=1e-12, atol=1e-12)


def test_rank_one_norm():
    s1 = uniform_space(8, seed=7, weights="random")
    s2 = uniform_space(6, seed=8, weights="random")
    rng = np.random.default_rng(9)
    g = rng.normal(size=(8, 6))
    h = rng.normal(size=(8, 6))
    # disjoint supports keep the excluded diagonals out of the picture
    g[4:, :] = 0.0
    g[:, 3:] = 0.0
    h[:4, :] = 0.0
    h[:, :3] = 0.0
    T = KernelOperator(table_kernel(np.einsum("ab,cd->abcd", g, h)), s1, s2)
    W = np.outer(s1.weights, s2.weights)
    expect = np.sqrt(np.sum(g ** 2 * W) * np.sum(h ** 2 * W))
    assert operator_norm(T, tol=1e-14).value == pytest.approx(expect, rel=1e-9)
    assert dense_norm(T) == pytest.approx(expect, rel=1e-12)


def test_norm_random_200():
    s1 = uniform_space(10, seed=1, weights="random")
    s2 = uniform_space(20, seed=2, weights="random")
    rng = np.random.default_rng(10)
    T = KernelOperator(table_kernel(rng.normal(size=(10, 20, 10, 20))), s1, s2)
    W = T.weighted_matrix()
    assert W.shape == (200, 200)
    svd = np.linalg.svd(W, compute_uv=False)[0]
    est = operator_norm(T, max_iters=5000, tol=1e-13)
    assert est.converged
    assert est.value == pytest.approx(svd, rel=1e-6)


def test_product_norm_factorizes(spaces):
    s1, s2, d1, d2 = spaces
    T = KernelOperator(product_kernel(size_factor(s1, d1), riesz_factor(s2, d2)), s1, s2)
    svd = np.linalg.svd(T.weighted_matrix(), compute_uv=False)[0]
    assert dense_norm(T) == pytest.approx(svd, rel=1e-12)
    assert operator_norm(T, tol=1e-13).value == pytest.approx(svd, rel=1e-6)


def test_adjoint_identities(spaces):
    s1, s2, d1, d2 = spaces
    rng = np.random.default_rng(11)
    for K in (product_kernel(size_factor(s1, d1), riesz_factor(s2, d2)),
              table_kernel(rng.normal(size=(9, 7, 9, 7)))):
        base = K.dense_table()
        perms = {"T": (0, 1, 2, 3), "T*": (2, 3, 0, 1), "T1": (2, 1, 0, 3), "T1*": (0, 3, 2, 1)}
        for which in ADJOINTS:
            np.testing.assert_array_equal(K.adjoint(which).dense_table(),
                                          base.transpose(perms[which]))
        # T* is the L2(mu) adjoint
        T = KernelOperator(K, s1, s2)
        f, g = rng.normal(size=(2, 9, 7))
        assert T.inner(f, g) == pytest.approx(T.adjoint("T*").inner(g, f), rel=1e-12)
    with pytest.raises(ValueError):
        K.adjoint("T2")


def test_truncation_monotone(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    prev = KernelOperator(K, s1, s2).table()
    for tau in (0.05, 0.1, 0.3, 0.6):
        cur = KernelOperator(K, s1, s2, tau).table()
        assert np.all((cur == 0) | (cur == prev))
        assert np.count_nonzero(cur) <= np.count_nonzero(prev)
        prev = cur


def test_json_roundtrip(spaces):
    s1, s2, d1, d2 = spaces
    for K in (product_kernel(size_factor(s1, d1), size_factor(s2, d2)),
              table_kernel(np.arange(9 * 7 * 9 * 7, dtype=float).reshape(9, 7, 9, 7), C=3.0)):
        K2 = KernelSpec.from_dict(json.loads(K.dumps()))
        np.testing.assert_array_equal(K2.dense_table(), K.dense_table())
        assert (K2.C, K2.C_K, K2.alpha1) == (K.C, K.C_K, K.alpha1)
    with pytest.raises(ValueError):
        KernelSpec.from_dict({"kind": "other"})


def test_shape_mismatch(spaces):
    s1, s2, d1, d2 = spaces
    K = product_kernel(size_factor(s1, d1), size_factor(s2, d2))
    with pytest.raises(ValueError):
        KernelOperator(K, s2, s1)
    with pytest.raises(ValueError):
        validate_assumptions(K, s1, s2, d1, d2, samples=0)
