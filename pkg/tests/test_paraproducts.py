import json

import numpy as np
import pytest

from prodt1 import build_haar
from prodt1 import paraproducts as pp
from prodt1.goodness import Frame


@pytest.fixture(scope="module")
def setup(frames):
    (f1, f2), params = frames
    fr1, fr2 = f1[3], f2[3]
    fr2s = Frame(build_haar(f2[2]), f2[1], params)
    return fr1, fr2, fr2s


def _avg(f, members, w):
    m = w[members].sum()
    return float(np.sum(f[members] * w[members]) / m) if m > 0 else 0.0


def test_pi_one_zero_symbol(setup):
    _, fr, _ = setup
    P = pp.pi_one(np.zeros(fr.space.n), fr)
    assert not P.apply(np.ones(fr.space.n)).any()
    rep = pp.pi_one_norm_check(np.zeros(fr.space.n), fr)
    assert rep["operator_norm"] == 0.0 and rep["bmo"] == 0.0 and rep["ratio"] == 0.0


def test_pi_one_constant_input(setup):
    _, fr, _ = setup
    a = np.random.default_rng(0).normal(size=fr.space.n)
    w = fr.space.weights
    expect = sum(np.sum(a * h * w) * h for h in fr.H)
    np.testing.assert_allclose(pp.pi_one(a, fr).apply(np.ones(fr.space.n)), expect, atol=1e-12)


def test_pi_one_naive(setup):
    _, fr, _ = setup
    rng = np.random.default_rng(1)
    for u in (None, 1, 2):
        a, om = rng.normal(size=(2, fr.space.n))
        np.testing.assert_allclose(pp.pi_one(a, fr, u).apply(om), pp.naive_pi_one(a, om, fr, u),
                                   atol=1e-12)


def test_pi_full_quadruple_loop(setup):
    fr1, fr2, _ = setup
    rng = np.random.default_rng(2)
    w1, w2 = fr1.space.weights, fr2.space.weights
    W = np.outer(w1, w2)
    b, x = rng.normal(size=(2, fr1.space.n, fr2.space.n))
    out = np.zeros_like(x)
    for i, c1 in enumerate(fr1.container_of_row):
        A = fr1.container.cubes[int(c1)].members
        for j, c2 in enumerate(fr2.container_of_row):
            B = fr2.container.cubes[int(c2)].members
            h = np.outer(fr1.H[i], fr2.H[j])
            avg = np.sum((x * W)[np.ix_(A, B)]) / (w1[A].sum() * w2[B].sum())
            out += avg * np.sum(b * h * W) * h
    np.testing.assert_allclose(pp.pi_full(b, fr1, fr2).apply(x), out, atol=1e-12)
    one = pp.pi_full(b, fr1, fr2).apply(np.ones_like(x))
    synth = fr1.H.T @ ((fr1.H * w1) @ b @ (fr2.H * w2).T) @ fr2.H
    np.testing.assert_allclose(one, synth, atol=1e-12)


def test_zero_symbols(setup):
    fr1, fr2, fr2s = setup
    z = np.zeros((fr1.space.n, fr2.space.n))
    x = np.ones_like(z)
    assert not pp.pi_full(z, fr1, fr2).apply(x).any()
    assert not pp.pi_mixed(z, fr1, fr2s).apply(x).any()
    assert pp.pi_full(z, fr1, fr2).norm() == 0.0


@pytest.mark.parametrize("kind", ["one", "full", "mixed"])
def test_adjoint(setup, kind):
    fr1, fr2, fr2s = setup
    rng = np.random.default_rng(3)
    if kind == "one":
        P = pp.pi_one(rng.normal(size=fr2.space.n), fr2)
        shape = (fr2.space.n,)
    else:
        b = rng.normal(size=(fr1.space.n, fr2.space.n))
        P = pp.pi_full(b, fr1, fr2) if kind == "full" else pp.pi_mixed(b, fr1, fr2s)
        shape = (fr1.space.n, fr2.space.n)
    w = P.weights
    for _ in range(5):
        f, g = rng.normal(size=(2,) + shape)
        lhs = np.sum(P.apply(f) * g * w)
        rhs = np.sum(f * P.adjoint_apply(g) * w)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("kind", ["one", "full", "mixed"])
def test_norm_matches_dense(setup, kind):
    fr1, fr2, fr2s = setup
    rng = np.random.default_rng(4)
    if kind == "one":
        P = pp.pi_one(rng.normal(size=fr2.space.n), fr2)
    else:
        b = rng.normal(size=(fr1.space.n, fr2.space.n))
        P = pp.pi_full(b, fr1, fr2) if kind == "full" else pp.pi_mixed(b, fr1, fr2s)
    s = np.sqrt(P.weights.ravel())
    dense = np.linalg.svd(s[:, None] * P.matrix() / s[None, :], compute_uv=False)[0]
    assert P.norm() == pytest.approx(dense, rel=1e-9)
    assert P.power_norm(tol=1e-12) == pytest.approx(dense, rel=1e-6)
    samples = list(rng.normal(size=(20,) + P.weights.shape))
    assert P.sample_norm(samples) <= dense * (1 + 1e-12)


def test_linear_in_symbol(setup):
    fr1, fr2, _ = setup
    rng = np.random.default_rng(5)
    b1, b2, x = rng.normal(size=(3, fr1.space.n, fr2.space.n))
    lhs = pp.pi_full(2 * b1 - b2, fr1, fr2).apply(x)
    rhs = 2 * pp.pi_full(b1, fr1, fr2).apply(x) - pp.pi_full(b2, fr1, fr2).apply(x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_rank_one_pi_one(setup):
    _, fr, _ = setup
    i = 3
    a = -2.5 * fr.H[i]
    P = pp.pi_one(a, fr)
    assert np.count_nonzero(np.abs(P.coef) > 1e-12) == 1
    mS = fr.container.mass[int(fr.container_of_row[i])]
    assert P.norm() == pytest.approx(2.5 * mS ** -0.5, rel=1e-10)


def test_rank_one_mixed(setup):
    fr1, _, fr2s = setup
    i, j = 2, 5
    b = np.outer(fr1.H[i], fr2s.H[j])
    P = pp.pi_mixed(b, fr1, fr2s)
    m1 = fr1.container.mass[int(fr1.container_of_row[i])]
    m2 = fr2s.container.mass[int(fr2s.container_of_row[j])]
    expect = (m1 * m2) ** -0.5
    assert P.norm() == pytest.approx(expect, rel=1e-10)
    rep = pp.pi_mixed_bound_check(b, fr1, fr2s, pairs=[(np.ones(P.weights.shape),) * 2])
    assert rep["bilinear_max"] <= expect * (1 + 1e-12)


def test_bmo_m2_constant_symbol(setup):
    _, fr, _ = setup
    balls = pp.ball_family([fr.sys, fr.container], 2.0)
    assert pp.bmo_m2_norm(np.full(fr.space.n, 3.0), fr.space, balls, 2.0) < 1e-12
    a = np.random.default_rng(6).normal(size=fr.space.n)
    assert pp.bmo_m2_norm(a, fr.space, balls, 2.0) > 0


def test_carleson_boxes(setup):
    _, fr, _ = setup
    rng = np.random.default_rng(7)
    for _ in range(30):
        a = rng.normal(size=fr.space.n) * rng.uniform(0.1, 3.0)
        rep = pp.pi_one_norm_check(a, fr)
        assert rep["box_constant"] <= 2.0
        assert rep["embedding_ok"]
        assert rep["ratio"] <= 2.0
    box = pp.carleson_boxes(pp.pi_one(a, fr).coef, fr)
    assert np.all(box.alpha >= 0)
    # the box of a top cube collects all energy below it
    top = fr.container.levels[fr.container.m]
    assert box.box[top].sum() == pytest.approx(np.sum(pp.pi_one(a, fr).coef ** 2), rel=1e-12)


def test_export_import(tmp_path):
    M = np.arange(12, dtype=float).reshape(3, 4) / 7
    binp, hdr = pp.export_matrix(M, tmp_path / "pi", {"kind": "test"})
    assert binp.stat().st_size == 12 * 8
    h = json.loads(hdr.read_text())
    assert h["shape"] == [3, 4] and h["byteorder"] == "little" and h["kind"] == "test"
    np.testing.assert_array_equal(pp.import_matrix(tmp_path / "pi"), M)


def test_shape_mismatch(setup):
    _, fr, _ = setup
    with pytest.raises(ValueError):
        pp.Paraproduct([pp.leg_average_to_haar(fr)], np.zeros(fr.n_rows + 1))
