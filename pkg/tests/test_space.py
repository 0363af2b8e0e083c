import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodt1 import (Ball, EmptySpace, NegativeWeight, UnknownPoint, ball_members,
                    fit_power_dominating, from_coords, from_table, power_dominating,
                    tail_integral, validate_space)
from prodt1.generators import shell_space, uniform_space
from prodt1.space import ball_masses, default_radius_grid, space_from_dict, space_to_dict, tail_bound


def test_line_space_is_valid(line3):
    assert validate_space(line3, power_dominating(1.0, 2.0)).ok


def test_quasitriangle_witness():
    t = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0.0]])
    rep = validate_space(from_table(t, [1, 1, 1]))
    assert not rep.ok
    wit = [v.witness for v in rep if v.kind == "quasitriangle"]
    assert (0, 1, 2) in wit


def test_quasitriangle_accepts_larger_A0():
    t = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0.0]])
    assert validate_space(from_table(t, [1, 1, 1], A0=2.5)).ok


def test_literal_square_dominator_is_exceeded():
    # (2r)^2 clipped at the minimum weight cannot dominate 64 unit masses in
    # the unit square: at radius ~0.73 the ball already holds every point.
    sp = uniform_space(64, seed=0, metric="sup", weights="unit")
    rep = validate_space(sp, power_dominating(2.0, 4.0, 1.0))
    assert "ball_mass" in rep.kinds()


def test_fitted_dominator_is_valid():
    sp = uniform_space(64, seed=0, metric="sup", weights="unit")
    dom = fit_power_dominating(sp, 2.0)
    assert validate_space(sp, dom).ok
    # the fitted scale is minimal: shrinking it breaks domination
    # (probed just above every pairwise distance, where open-ball masses jump)
    d = np.unique(sp.rho[sp.rho > 0])
    grid = np.sort(np.concatenate([d * (1 + 1e-9), [d.max() * 2]]))
    assert validate_space(sp, dom, radius_grid=grid).ok
    smaller = power_dominating(2.0, dom.spec["scale"] * (1 - 1e-6), dom.spec["floor"])
    assert "ball_mass" in validate_space(sp, smaller, radius_grid=grid).kinds()


def test_bundled_space_validates():
    from prodt1.experiments import load_bundled_space
    sp, dom = load_bundled_space()
    assert sp.n == 64
    assert validate_space(sp, dom).ok


@pytest.mark.parametrize("kind,table", [
    ("rho_diagonal", [[1, 1], [1, 0]]),
    ("rho_positive", [[0, 0], [0, 0]]),
    ("rho_symmetric", [[0, 1], [2, 0]]),
])
def test_metric_faults(kind, table):
    rep = validate_space(from_table(np.array(table, float), [1, 1], A0=3.0))
    assert kind in rep.kinds()


def test_lambda_faults(line3):
    grid = [1.0, 2.0, 4.0]
    # decreasing lambda
    dec = power_dominating(-1.0, 10.0)
    assert "lambda_monotone" in validate_space(line3, dec, radius_grid=grid).kinds()
    # doubling constant understated
    from prodt1.space import DominatingFunction
    bad = DominatingFunction(dec.lam, 1.0)
    inc = power_dominating(3.0, 10.0)
    bad = DominatingFunction(inc.lam, 2.0)
    assert "lambda_doubling" in validate_space(line3, bad, radius_grid=grid).kinds()


def test_total_mass_zero():
    assert "total_mass" in validate_space(from_coords([0.0, 1.0], [0.0, 0.0])).kinds()


def test_errors():
    with pytest.raises(EmptySpace):
        from_coords(np.zeros((0, 2)))
    with pytest.raises(NegativeWeight):
        validate_space(from_coords([0.0, 1.0], [1.0, -1.0]))


def test_ball_members_examples(line3):
    assert ball_members(line3, Ball(1, 1.5)) == {0, 1, 2}
    assert ball_members(line3, Ball(1, 0.5)) == {1}
    # open ball: distance exactly the radius is excluded
    assert ball_members(line3, Ball(1, 1.0)) == {1}
    with pytest.raises(UnknownPoint):
        ball_members(line3, Ball(7, 1.0))
    with pytest.raises(ValueError):
        ball_members(line3, Ball(1, 0.0))


def test_ball_members_scan(space64, rng):
    for _ in range(100):
        c = int(rng.integers(64))
        r = float(rng.uniform(0.01, 1.0))
        scan = {j for j in range(64)
                if np.linalg.norm(space64.coords[j] - space64.coords[c]) < r}
        assert ball_members(space64, Ball(c, r)) == scan


def test_ball_masses_match_members(space64):
    radii = default_radius_grid(space64)
    bm = ball_masses(space64, radii)
    for i in range(0, 64, 7):
        for j, r in enumerate(radii):
            ids = ball_members(space64, Ball(i, r))
            assert bm[i, j] == pytest.approx(space64.weights[list(ids)].sum(), abs=1e-15)


def test_tail_empty_when_ball_covers(line3):
    assert tail_integral(line3, power_dominating(1.0, 2.0), 1, 5.0, 1.0) == 0.0


def test_tail_dyadic_shells():
    pos = [0.0] + [2.0 ** j for j in range(1, 11)]
    w = [1.0] + [2.0 ** j for j in range(1, 11)]
    sp = from_coords(pos, w)
    val = tail_integral(sp, power_dominating(1.0, 1.0), 0, 1.0, 1.0)
    assert val == pytest.approx(1023 / 1024, rel=1e-14)


def test_tail_bound_random():
    sp = uniform_space(128, seed=5, weights="uniform")
    dom = fit_power_dominating(sp, 2.0)
    for c in range(0, 128, 9):
        for r_B in (0.05, 0.1, 0.3):
            assert tail_integral(sp, dom, c, r_B, 0.5) <= tail_bound(dom, r_B, 0.5)


def test_tail_eps_positive(line3):
    with pytest.raises(ValueError):
        tail_integral(line3, power_dominating(1.0, 2.0), 0, 1.0, 0.0)


def test_serialization_roundtrip():
    sp = shell_space(20, seed=2)
    dom = fit_power_dominating(sp, 2.0)
    d = json.loads(json.dumps(space_to_dict(sp, dom)))
    sp2, dom2 = space_from_dict(d)
    assert sp2.ids == sp.ids
    np.testing.assert_array_equal(sp2.rho, sp.rho)
    np.testing.assert_array_equal(sp2.weights, sp.weights)
    assert dom2.spec["scale"] == dom.spec["scale"]
    assert validate_space(sp2, dom2).ok


def test_table_roundtrip():
    t = np.array([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]])
    sp = from_table(t, [1, 2, 3], ids=["a", "b", "c"])
    sp2, dom = space_from_dict(space_to_dict(sp))
    assert dom is None
    assert sp2.ids == ("a", "b", "c")
    np.testing.assert_array_equal(sp2.rho, t)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 20), st.integers(2, 30))
def test_validation_independent_of_order(seed, n):
    sp = uniform_space(n, seed=seed, weights="random")
    dom = fit_power_dominating(sp, 2.0)
    perm = np.random.default_rng(seed).permutation(n)
    sp2 = from_coords(sp.coords[perm], sp.weights[perm])
    dom2 = fit_power_dominating(sp2, 2.0)
    assert dom2.spec["scale"] == pytest.approx(dom.spec["scale"], rel=1e-12)
    assert validate_space(sp, dom).ok and validate_space(sp2, dom2).ok
