import json

import numpy as np
import pytest

from prodt1 import UnknownIndex, build_haar, build_system, expand, from_coords, reconstruct
from prodt1.generators import multiscale_space, uniform_space
from prodt1.haar import CoefficientField, expand2, norm_profile


def _two_children(w):
    sp = from_coords([0.0, 1.0], w)
    sys = build_system(sp, delta=1 / 128, m=-1, k=0, seed=0)
    top = sys.levels[-1][0]
    assert len(sys.cubes[top].children) == 2
    return sp, sys, build_haar(sys), top


def test_equal_children():
    sp, sys, B, top = _two_children([0.5, 0.5])
    a, b = B.coef[(top, 1)]
    assert a == pytest.approx(1.0, abs=1e-15) and b == pytest.approx(1.0, abs=1e-15)
    h = B.function(top, 1)
    np.testing.assert_allclose(sorted(h), [-1.0, 1.0], atol=1e-15)


def test_three_quarter_child():
    sp, sys, B, top = _two_children([0.75, 0.25])
    a, b = B.coef[(top, 1)]
    assert a == pytest.approx(1 / np.sqrt(3), rel=1e-14)
    assert b == pytest.approx(np.sqrt(3), rel=1e-14)
    h = B.function(top, 1)
    assert h[0] == pytest.approx(a) and h[1] == pytest.approx(-b)
    assert np.sum(h * h * sp.weights) == pytest.approx(1.0, rel=1e-14)
    assert np.sum(h * sp.weights) == pytest.approx(0.0, abs=1e-15)


def test_children_ordered_by_mass():
    sp, sys, B, top = _two_children([0.25, 0.75])
    first = B.child_order[top][0]
    assert list(sys.cubes[first].members) == [1]


@pytest.mark.parametrize("seed", range(100))
def test_gram_identity_per_cube(seed):
    sp = multiscale_space(3, 2 + seed % 3, seed=seed, weights=["uniform", "random", "sparse"][seed % 3])
    sys = build_system(sp, m=0, k=3, seed=seed)
    B = build_haar(sys)
    for c in sys.cubes:
        rows = np.flatnonzero(B.row_cube == c.id)
        if rows.size:
            np.testing.assert_allclose(B.gram(rows), np.eye(rows.size), atol=1e-10)
    rows = B.expansion_rows()
    np.testing.assert_allclose(B.gram(rows), np.eye(rows.size), atol=1e-10)


def test_zero_mass_cubes_flagged():
    sp = from_coords([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
    sys = build_system(sp, delta=1 / 128, m=-1, k=0, seed=0)
    B = build_haar(sys)
    assert len(B.zero_mass_cubes) == 1
    z = B.zero_mass_cubes[0]
    assert not np.any(B.function(z, 0))
    rows = B.expansion_rows()
    np.testing.assert_allclose(B.gram(rows), np.eye(rows.size), atol=1e-12)


def test_size_bounds():
    for s in range(10):
        sp = multiscale_space(3, 3, seed=s, weights="random")
        prof = norm_profile(build_haar(build_system(sp, m=0, k=3, seed=s)))
        assert prof["l1_linf_max"] <= 4.0
        assert prof["child_average_max"] <= 1.0 + 1e-12


@pytest.fixture(scope="module")
def basis128():
    sp = uniform_space(128, seed=8, weights="random")
    return build_haar(build_system(sp, m=0, k=3, seed=8))


def test_expand_constant(basis128):
    B = basis128
    c = expand(np.ones(B.space.n), B)
    mass = B.sys.mass
    for (cube, u), v in c.items():
        if u >= 1:
            assert abs(v) < 1e-12
        else:
            assert v == pytest.approx(np.sqrt(mass[cube]), rel=1e-12)


def test_expand_single_haar(basis128):
    B = basis128
    rows = B.expansion_rows()
    target = rows[len(rows) // 2]
    c = expand(B.H[target], B)
    expect = np.zeros(rows.size)
    expect[np.flatnonzero(rows == target)] = 1.0
    np.testing.assert_allclose(c.values, expect, atol=1e-12)


def test_parseval_against_projection(basis128):
    B = basis128
    w = B.weights
    rows = B.expansion_rows()
    # explicit L2(mu) projector onto the span of the expansion functions
    H = B.H[rows]
    G = (H * w) @ H.T
    rng = np.random.default_rng(1)
    for _ in range(50):
        f = rng.normal(size=B.space.n)
        coef = np.linalg.solve(G, (H * w) @ f)
        Pf = coef @ H
        c = expand(f, B)
        assert np.sum(c.values ** 2) == pytest.approx(np.sum(Pf ** 2 * w), rel=1e-10)


def test_reconstruct(basis128):
    B = basis128
    sys = B.sys
    assert not np.any(reconstruct(CoefficientField(B, np.zeros(0, np.int64), np.zeros(0))))
    rng = np.random.default_rng(2)
    # measurable at the finest expanded generation k - 1 ... the expansion recovers
    # functions constant on generation-k cubes
    vals = rng.normal(size=len(sys.cubes))
    f = np.zeros(B.space.n)
    for q in sys.levels[sys.k]:
        f[sys.cubes[q].members] = vals[q]
    f[B.weights == 0] = 0.0
    back = reconstruct(expand(f, B))
    pos = B.weights > 0
    np.testing.assert_allclose(back[pos], f[pos], atol=1e-10)
    r = B.expansion_rows()[3]
    single = CoefficientField(B, np.array([r]), np.array([2.5]))
    np.testing.assert_allclose(reconstruct(single), 2.5 * B.H[r])


def test_coefficient_field_io(basis128, tmp_path):
    B = basis128
    c = expand(np.arange(B.space.n, dtype=float), B)
    d = c.as_dict()
    c2 = CoefficientField.from_dict(B, d)
    np.testing.assert_array_equal(c2.values, c.values)
    path = tmp_path / "coef.csv"
    c.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "generation,cube_id,u,value"
    assert len(lines) == c.rows.size + 1
    with pytest.raises(UnknownIndex):
        CoefficientField.from_dict(B, {(10 ** 6, 1): 1.0})


def test_expand2_matches_tensor(basis128):
    B = basis128
    rng = np.random.default_rng(3)
    r = B.expansion_rows()[:6]
    F = rng.normal(size=(B.space.n, B.space.n))
    c = expand2(F, B, r, B, r)
    i, j = 2, 4
    direct = np.sum(F * np.outer(B.H[r[i]] * B.weights, B.H[r[j]] * B.weights))
    assert c.values[i, j] == pytest.approx(direct, rel=1e-12)
