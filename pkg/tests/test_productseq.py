import numpy as np
import pytest

from prodt1 import BadCubeEntry, NotRectUnion
from prodt1.haar import ProductCoefficients
from prodt1.productseq import (AdmissibleOpenSet, CandidateFamily, bmo_prod_norm,
                               bmo_prod_norm_function, dilated_masses, duality_pairing, h1_norm,
                               level_set, norm_report, s1_norm, s2_norm, square_function,
                               strong_maximal, t1_norm)


def _rs(pf):
    return pf.f1.n_rows, pf.f2.n_rows


def _unit(pf, i, j):
    v = np.zeros(_rs(pf))
    v[i, j] = 1.0
    return pf.coefficients(v)


def _container_rect(pf, i, j):
    s1, s2 = pf.containers
    a = s1.cubes[int(pf.f1.container_of_row[i])]
    b = s2.cubes[int(pf.f2.container_of_row[j])]
    return a, b


def test_zero_field(product_frame):
    pf = product_frame
    z = pf.zeros()
    S, h1 = square_function(z, pf)
    assert not S.any() and h1 == 0.0
    assert bmo_prod_norm(z, pf) == 0.0
    assert s2_norm(z, pf) == 0.0 and t1_norm(z, pf) == 0.0


@pytest.mark.parametrize("ij", [(0, 0), (3, 7), (-1, -1)])
def test_single_coefficient(product_frame, ij):
    pf = product_frame
    i, j = (k % n for k, n in zip(ij, _rs(pf)))
    c = _unit(pf, i, j)
    a, b = _container_rect(pf, i, j)
    chi = np.zeros((pf.f1.space.n, pf.f2.space.n))
    chi[np.ix_(a.members, b.members)] = 1.0
    mS = float(pf.w1[a.members].sum() * pf.w2[b.members].sum())
    S, h1 = square_function(c, pf)
    np.testing.assert_allclose(S, chi * mS ** -0.5, atol=1e-14)
    assert h1 == pytest.approx(mS ** 0.5, rel=1e-12)
    assert s1_norm(c, pf) == pytest.approx(mS ** 0.5, rel=1e-12)
    assert s2_norm(c, pf) == 1.0
    fam = CandidateFamily(singles=False, sets=[chi.astype(bool)])
    assert bmo_prod_norm(c, pf, fam) == pytest.approx(mS ** -0.5, rel=1e-12)
    assert duality_pairing(c, c) == 1.0


def test_constant_function_lifts_to_zero(product_frame):
    pf = product_frame
    c = pf.lift(np.ones((pf.f1.space.n, pf.f2.space.n)))
    assert np.max(np.abs(c.values)) < 1e-13
    S, _ = square_function(c, pf)
    assert np.max(S) < 1e-13


def test_bmo_single_rectangles_brute_force(product_frame):
    pf = product_frame
    rng = np.random.default_rng(4)
    s1, s2 = pf.containers
    rects = [tuple(set(x.members.tolist()) for x in _container_rect(pf, i, j))
             for i in range(_rs(pf)[0]) for j in range(_rs(pf)[1])]
    for _ in range(5):
        c = pf.coefficients(rng.normal(size=_rs(pf)) * (rng.random(_rs(pf)) < 0.4))
        vals = c.values.ravel()
        best = 0.0
        for A in s1.cubes:
            sa = set(A.members.tolist())
            for B in s2.cubes:
                mu = s1.mass[A.id] * s2.mass[B.id]
                if mu <= 0:
                    continue
                sb = set(B.members.tolist())
                tot = sum(v ** 2 for v, (a, b) in zip(vals, rects) if a <= sa and b <= sb)
                best = max(best, tot / mu)
        assert bmo_prod_norm(c, pf) == pytest.approx(np.sqrt(best), rel=1e-12)


def test_duality(product_frame):
    pf = product_frame
    a, b = _unit(pf, 0, 0), _unit(pf, 1, 1)
    assert duality_pairing(a, b) == 0.0
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        s = pf.coefficients(rng.normal(size=_rs(pf)))
        t = pf.coefficients(rng.normal(size=_rs(pf)))
        worst = max(worst, norm_report(s, t, pf)["duality_ratio"])
    assert worst <= 2.0  # the frozen suite constant


def test_conform_rejects_bad_entries(product_frame):
    pf = product_frame
    B1, B2 = pf.f1.basis, pf.f2.basis
    extra1 = np.setdiff1d(B1.select(), pf.f1.rows)
    assert extra1.size
    rows1 = np.concatenate([pf.f1.rows, extra1[:1]])
    v = np.zeros((rows1.size, pf.f2.rows.size))
    c = ProductCoefficients(B1, rows1, B2, pf.f2.rows, v)
    # zero entries on ineligible rows are dropped
    assert pf.conform(c).values.shape == _rs(pf)
    v[-1, 0] = 1.0
    with pytest.raises(BadCubeEntry):
        pf.conform(c.like(v))


def test_lift_of_tensor_haar(product_frame):
    pf = product_frame
    i, j = 4, 2
    F = np.outer(pf.f1.H[i], pf.f2.H[j])
    np.testing.assert_allclose(pf.lift(F).values, _unit(pf, i, j).values, atol=1e-12)


def test_project_lift_is_projection(product_frame):
    pf = product_frame
    n1, n2 = pf.f1.space.n, pf.f2.space.n
    # weighted least squares onto span{h_i (x) h_j}
    K = np.kron(pf.f1.H, pf.f2.H).T
    sw = np.sqrt(np.outer(pf.w1, pf.w2).ravel())
    rng = np.random.default_rng(6)
    for _ in range(5):
        F = rng.normal(size=(n1, n2))
        coef, *_ = np.linalg.lstsq(K * sw[:, None], F.ravel() * sw, rcond=None)
        P = (K @ coef).reshape(n1, n2)
        np.testing.assert_allclose(pf.project(pf.lift(F)), P, atol=1e-10)


def test_lift_isometries(product_frame):
    pf = product_frame
    rng = np.random.default_rng(7)
    F = rng.normal(size=(pf.f1.space.n, pf.f2.space.n))
    assert s1_norm(pf.lift(F), pf) == h1_norm(F, pf)
    assert t1_norm(pf.lift(F), pf) == bmo_prod_norm_function(F, pf)


def test_strong_maximal_examples(frames):
    (a, b), _ = frames
    s1, s2 = a[2], b[2]
    n1, n2 = s1.space.n, s2.space.n
    ones = strong_maximal(np.ones((n1, n2)), s1, s2)
    assert np.all(ones <= 1 + 1e-12)
    m5_1, m5_2 = dilated_masses(s1), dilated_masses(s2)
    for A, B in [(s1.cubes[3], s2.cubes[5]), (s1.cubes[-1], s2.cubes[0])]:
        chi = np.zeros((n1, n2))
        chi[np.ix_(A.members, B.members)] = 1
        M = strong_maximal(chi, s1, s2)
        lower = s1.mass[A.id] * s2.mass[B.id] / (m5_1[A.id] * m5_2[B.id])
        assert np.all(M[np.ix_(A.members, B.members)] >= lower - 1e-14)


def test_strong_maximal_brute_force(frames):
    (a, b), _ = frames
    s1, s2 = a[2], b[2]
    n1, n2 = s1.space.n, s2.space.n
    w = np.outer(s1.space.weights, s2.space.weights)
    m5_1, m5_2 = dilated_masses(s1), dilated_masses(s2)
    rng = np.random.default_rng(8)
    worst = 0.0
    for t in range(50):
        F = rng.normal(size=(n1, n2))
        M = strong_maximal(F, s1, s2)
        if t < 3:
            ref = np.zeros((n1, n2))
            for A in s1.cubes:
                for B in s2.cubes:
                    val = np.sum(np.abs(F[np.ix_(A.members, B.members)]) * w[np.ix_(A.members, B.members)])
                    val /= m5_1[A.id] * m5_2[B.id]
                    blk = ref[np.ix_(A.members, B.members)]
                    ref[np.ix_(A.members, B.members)] = np.maximum(blk, val)
            np.testing.assert_allclose(M, ref, rtol=1e-12)
        worst = max(worst, np.sqrt(np.sum(M ** 2 * w) / np.sum(F ** 2 * w)))
    assert worst < 4.0


def test_admissible_sets(frames):
    (a, b), _ = frames
    s1, s2 = a[2], b[2]
    om = AdmissibleOpenSet(s1, s2, [(1, 2), (3, 4)])
    again = AdmissibleOpenSet.from_mask(om.mask, s1, s2, strict=True)
    np.testing.assert_array_equal(again.mask, om.mask)
    bad = om.mask.copy()
    bad[0, 0] = not bad[0, 0]
    bad[0, 1] = True
    if not np.array_equal(AdmissibleOpenSet.from_mask(bad, s1, s2).mask, bad):
        with pytest.raises(NotRectUnion):
            AdmissibleOpenSet.from_mask(bad, s1, s2, strict=True)
    full = AdmissibleOpenSet.from_mask(np.ones_like(om.mask), s1, s2)
    assert full.measure() == pytest.approx(s1.space.total_mass * s2.space.total_mass)
    E = np.zeros_like(om.mask)
    E[np.ix_(s1.cubes[2].members, s2.cubes[2].members)] = True
    assert level_set(E, s1, s2).mask[E].all()
