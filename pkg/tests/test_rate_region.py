import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bidirelay.core import ValidationError, generate_channels
from bidirelay.precoding import pair_rates, single_pair_beamformer, single_pair_boundary
from bidirelay.rate_region import (HULL_SLACK, comprehensive_hull, convex_hull_2d,
                                   hull_violation, pareto_front, polygon_area,
                                   random_beam_region, read_region_csv, region_contains,
                                   region_metrics, simplex_grid, sweep_region, write_hull_csv,
                                   write_region_csv, write_svg)


def brute_force_hull(pts):
    """Vertices of every edge with all other points strictly on its left."""
    verts = set()
    n = len(pts)
    for i, j in itertools.permutations(range(n), 2):
        a, b = pts[i], pts[j]
        c = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        c[[i, j]] = 1.0
        if np.all(c > 0):
            verts.update([i, j])
    return {tuple(pts[k]) for k in verts}


# -- hulls -------------------------------------------------------------------
def test_collinear_points():
    h = convex_hull_2d([[0, 0], [1, 1], [2, 2]])
    assert sorted(map(tuple, h)) == [(0, 0), (2, 2)]


def test_square_with_interior_point():
    h = convex_hull_2d([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
    assert len(h) == 4
    assert set(map(tuple, h)) == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert polygon_area(h) == pytest.approx(1.0)
    # counter-clockwise: positive signed area
    x, y = h[:, 0], h[:, 1]
    assert np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) > 0


def test_single_point():
    assert convex_hull_2d([[1.0, 2.0]]).tolist() == [[1.0, 2.0]]


@pytest.mark.parametrize("seed", range(3))
def test_matches_brute_force_on_200_points(seed):
    pts = np.random.default_rng(seed).uniform(0, 1, (200, 2))
    h = convex_hull_2d(pts)
    assert set(map(tuple, h)) == brute_force_hull(pts)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(3, 60))
def test_hull_permutation_invariant_and_contains_points(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 5, (n, 2))
    h = convex_hull_2d(pts)
    h2 = convex_hull_2d(pts[rng.permutation(n)])
    assert np.array_equal(h, h2)
    assert set(map(tuple, h)) <= set(map(tuple, pts))
    assert hull_violation(h, pts) <= HULL_SLACK
    ch = comprehensive_hull(pts)
    assert hull_violation(ch, pts) <= HULL_SLACK
    assert hull_violation(ch, [[0, 0], [pts[:, 0].max(), 0], [0, pts[:, 1].max()]]) <= HULL_SLACK


def test_pareto_front():
    pts = np.array([[1, 1], [2, 0.5], [0.5, 2], [0.4, 0.4], [2, 0.2]])
    front = pareto_front(pts)
    assert set(map(tuple, front)) == {(1, 1), (2, 0.5), (0.5, 2)}


def test_hull_violation_detects_outside_points():
    sq = convex_hull_2d([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert hull_violation(sq, [[0.5, 0.5]]) == 0.0
    assert hull_violation(sq, [[1.5, 0.5]]) == pytest.approx(0.5)


# -- sweeps ------------------------------------------------------------------
def test_simplex_grid():
    g = simplex_grid(3, 5, 2.0)
    assert g.shape == (15, 3)
    assert np.allclose(g.sum(axis=1), 2.0)
    with pytest.raises(ValidationError):
        simplex_grid(2, 1, 1.0)


def test_single_pair_region_is_the_boundary_sweep():
    sc = generate_channels(1, 2, 1.0, 10 ** 0.3, seed=2)
    reg = sweep_region(sc, "dpc", t_grid=101, power_grid=2)
    _, rates = single_pair_boundary(*sc.channels[0], sc.power_budget / sc.sigma2, 101)
    assert np.allclose(reg.rates[:, 0], rates.sum(axis=1), rtol=1e-13)
    lin = sweep_region(sc, "linear", t_grid=101, power_grid=2)
    assert np.allclose(lin.rates, reg.rates, rtol=1e-13)


def test_full_power_on_one_pair(scenario2):
    reg = sweep_region(scenario2, "linear", t_grid=5, power_grid=5)
    idx = [i for i in range(len(reg)) if np.allclose(reg.point(i).powers,
                                                    [scenario2.power_budget, 0])]
    assert idx
    for i in idx:
        pt = reg.point(i)
        assert pt.rates[1] == 0.0
        u = pt.beams[0]
        g = np.abs(scenario2.channels[0] @ u.conj()) ** 2
        single = np.log2(1 + scenario2.power_budget * g / scenario2.sigma2).sum()
        assert pt.rates[0] == pytest.approx(single, rel=1e-13)


@pytest.mark.parametrize("seed", [3, 11, 19])
def test_points_reproducible_from_provenance(seed):
    sc = generate_channels(2, 2, 1.0, 5.0, seed)
    for strategy in ("linear", "dpc"):
        reg = sweep_region(sc, strategy, t_grid=4, power_grid=4)
        for idx in np.random.default_rng(seed).integers(0, len(reg), 25):
            pt = reg.point(int(idx))
            beams = np.array([single_pair_beamformer(*sc.channels[i], pt.t[i]) for i in range(2)])
            again = pair_rates(sc, beams, pt.powers, pt.order)
            assert np.allclose(again, pt.rates, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_dpc_contains_linear(seed):
    sc = generate_channels(2, 2, 1.0, 10.0, seed + 100)
    lin = sweep_region(sc, "linear", t_grid=9, power_grid=9)
    dpc = sweep_region(sc, "dpc", t_grid=9, power_grid=9)
    assert region_contains(dpc, lin)


def test_single_order_subset_of_all_orders(scenario2):
    one = sweep_region(scenario2, "dpc", 6, 6, orders=[(1, 0)])
    full = sweep_region(scenario2, "dpc", 6, 6)
    assert region_contains(full, one)
    got = {tuple(r) for r in one.rates}
    assert got <= {tuple(r) for r in full.rates}


def test_rates_nondecreasing_as_noise_drops(scenario2):
    a = sweep_region(scenario2, "dpc", 5, 5)
    b = sweep_region(scenario2.with_power(scenario2.power_budget, 0.5), "dpc", 5, 5)
    assert np.all(b.rates >= a.rates - 1e-15)


def test_large_dpc_sweep_rejected():
    sc = generate_channels(7, 2, 1.0, 1.0, 0)
    with pytest.raises(ValidationError):
        sweep_region(sc, "dpc", 2, 2)
    with pytest.raises(ValidationError):
        sweep_region(sc, "bogus", 2, 2)


# -- random search -----------------------------------------------------------
def test_forced_random_beam_matches_sweep(scenario2):
    sweep = sweep_region(scenario2, "dpc", t_grid=3, power_grid=4)
    pt = sweep.point(5 * sweep.grid_shape[1] * sweep.grid_shape[2])
    rand = random_beam_region(scenario2, "dpc", power_grid=4, beams=pt.beams[None])
    s = 5
    block = sweep.rates.reshape(sweep.grid_shape + (2,))[s].reshape(-1, 2)
    assert np.array_equal(rand.rates, block)


def test_random_is_deterministic_and_unit_norm(scenario2):
    a = random_beam_region(scenario2, "linear", 200, seed=4, power_grid=3)
    b = random_beam_region(scenario2, "linear", 200, seed=4, power_grid=3)
    assert np.array_equal(a.rates, b.rates)
    assert np.allclose(np.linalg.norm(a.beams, axis=-1), 1.0, atol=1e-12)


def test_random_prefix_monotone(scenario2):
    big = random_beam_region(scenario2, "dpc", 10_000, seed=9, power_grid=5)
    small = random_beam_region(scenario2, "dpc", 100, seed=9, power_grid=5)
    assert np.array_equal(big.beams[:100], small.beams)
    assert region_contains(big, small)


def test_random_beams_isotropic():
    sc = generate_channels(1, 2, 1.0, 1.0, 0)
    reg = random_beam_region(sc, "linear", 20_000, seed=1, power_grid=2)
    u = reg.beams[:, 0, :]
    # E[u u^H] = I / M for the uniform measure on the sphere
    cov = np.einsum("sa,sb->ab", u, u.conj()) / len(u)
    assert np.allclose(cov, np.eye(2) / 2, atol=0.01)


# -- metrics and export ------------------------------------------------------
def test_metrics(scenario2):
    reg = sweep_region(scenario2, "dpc", 5, 5)
    assert region_metrics(reg, reg)["area_ratio"] == pytest.approx(1.0)
    scaled = sweep_region(scenario2, "dpc", 5, 5)
    scaled.rates = 2 * scaled.rates
    assert region_metrics(reg, scaled)["area_ratio"] == pytest.approx(0.25, rel=1e-12)
    one = sweep_region(generate_channels(1, 2, 1.0, 1.0, 0), "dpc", 3, 2)
    with pytest.raises(ValidationError):
        region_metrics(reg, one)


def test_csv_and_svg(tmp_path, scenario2):
    reg = sweep_region(scenario2, "dpc", 3, 3)
    path = tmp_path / "r.csv"
    write_region_csv(reg, path, comment="run info")
    header, rows = read_region_csv(path)
    assert path.read_text().startswith("# run info\n")
    assert header == ["strategy", "order", "t_params", "powers", "R_pair_1", "R_pair_2"]
    assert len(rows) == len(reg)
    assert np.array_equal(np.array([r[4:] for r in rows]), reg.rates)
    assert rows[0][1] in ("1-2", "2-1")
    hull = tmp_path / "h.csv"
    write_hull_csv(reg, hull)
    assert hull.read_text().splitlines()[0] == "hull_x,hull_y"
    rand = random_beam_region(scenario2, "dpc", 5, power_grid=3)
    write_region_csv(rand, path)
    assert read_region_csv(path)[1][0][2].startswith("random:")
    svg = tmp_path / "r.svg"
    write_svg([reg, rand], svg, ["sweep", "random"], "test", comment="a<b")
    text = svg.read_text()
    assert "Sum-Rate Pair 1" in text and "Sum-Rate Pair 2" in text
    assert "a&lt;b" in text
