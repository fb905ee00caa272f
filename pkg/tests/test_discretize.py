import math

import numpy as np
import pytest
import scipy.linalg

from hybrid_isaacs.discretize import (build_tables, interp_weights, interpolate, make_grid,
                                      semigroup_step)

from conftest import toy_spec


# ---------------------------------------------------------------------------
# grids

def test_grid_coordinates_are_reproducible():
    spec = toy_spec(box=((-1.0, 1.0),))
    grid = make_grid(spec, 5)
    assert grid.n_points == 5
    np.testing.assert_array_equal(grid.points[:, 0], [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert grid.points[3, 0] == grid.box[0, 0] + 3 * grid.spacing[0]


def test_grid_flat_index_row_major():
    spec = toy_spec(box=((-1.0, 1.0), (0.0, 1.0)))
    grid = make_grid(spec, (3, 4))
    assert grid.n_points == 12
    assert grid.flat_index((1, 2)) == 6
    assert grid.multi_index(6) == (1, 2)
    np.testing.assert_allclose(grid.points[6], [0.0, 2.0 / 3.0])


def test_grid_rejects_bad_counts():
    spec = toy_spec()
    with pytest.raises(ValueError):
        make_grid(spec, 1)
    with pytest.raises(ValueError):
        make_grid(spec, (3, 3))


# ---------------------------------------------------------------------------
# interpolation

def test_linear_interpolation_1d():
    spec = toy_spec(box=((0.0, 1.0),))
    grid = make_grid(spec, 2)
    values = np.array([0.0, 10.0])
    assert interpolate(values, grid, [0.25]) == pytest.approx(2.5)


def test_clamped_below_box():
    spec = toy_spec(box=((0.0, 1.0),))
    grid = make_grid(spec, 2)
    values = np.array([3.0, 10.0])
    assert interpolate(values, grid, [-1.0]) == 3.0
    assert interpolate(values, grid, [42.0]) == 10.0


def test_nodal_exactness():
    spec = toy_spec(box=((-1.0, 1.0), (0.0, 2.0)))
    grid = make_grid(spec, (7, 9))
    rng = np.random.default_rng(3)
    values = rng.standard_normal(grid.n_points)
    for flat in range(grid.n_points):
        assert interpolate(values, grid, grid.points[flat]) == values[flat]


def test_bilinear_exact_for_affine():
    spec = toy_spec(box=((-1.0, 1.0), (0.0, 2.0)))
    grid = make_grid(spec, (5, 5))
    values = 2.0 + 3.0 * grid.points[:, 0] - 0.5 * grid.points[:, 1]
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform([-1, 0], [1, 2])
        assert interpolate(values, grid, x) == pytest.approx(2 + 3 * x[0] - 0.5 * x[1])


def test_interp_weights_partition_of_unity():
    spec = toy_spec(box=((-1.0, 1.0), (0.0, 2.0)))
    grid = make_grid(spec, (6, 4))
    rng = np.random.default_rng(1)
    pts = rng.uniform([-2, -1], [2, 3], size=(50, 2))
    idx, wts = interp_weights(grid, pts)
    np.testing.assert_allclose(wts.sum(axis=1), 1.0, atol=1e-14)
    assert (wts >= 0).all()
    assert idx.min() >= 0 and idx.max() < grid.n_points


# ---------------------------------------------------------------------------
# one-step linear factor

def test_semigroup_zero_matrix_is_identity():
    np.testing.assert_array_equal(semigroup_step(np.zeros((3, 3)), 0.7), np.eye(3))


def test_semigroup_scalar():
    out = semigroup_step(np.array([[0.5]]), 0.1)
    assert out[0, 0] == pytest.approx(math.exp(-0.05), rel=1e-14)


def test_semigroup_diagonal():
    out = semigroup_step(np.diag([1.0, 2.0]), 1.0)
    np.testing.assert_allclose(out, np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-13)


def test_semigroup_matches_scipy_up_to_norm_ten():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3, 4):
        for _ in range(8):
            A = rng.standard_normal((n, n))
            dt = rng.uniform(0.01, 10.0 / max(1e-9, np.abs(A).sum(axis=0).max()))
            ours = semigroup_step(A, dt)
            ref = scipy.linalg.expm(-dt * A)
            err = np.abs(ours - ref).max() / max(1.0, np.abs(ref).max())
            assert err <= 1e-12


def test_semigroup_rotation_is_orthogonal():
    # -A generates a clockwise rotation here, so the quarter turn lands on
    # [[0, 1], [-1, 0]]
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    out = semigroup_step(A, math.pi / 2)
    np.testing.assert_allclose(out, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-13)


def test_semigroup_input_validation():
    with pytest.raises(ValueError):
        semigroup_step(np.zeros((2, 3)), 0.1)
    with pytest.raises(ValueError):
        semigroup_step(np.zeros((2, 2)), 0.0)


# ---------------------------------------------------------------------------
# tables

def test_tables_bounds_and_quadrature():
    spec = toy_spec(f="0", k="1", lam=0.5)
    grid = make_grid(spec, 11)
    tables = build_tables(spec, grid, dt=0.1)
    assert tables.k_sup == 1.0
    assert tables.f_sup == 0.0
    assert tables.gamma == pytest.approx(math.exp(-0.05), rel=1e-15)
    assert tables.weight == pytest.approx((1 - math.exp(-0.05)) / 0.5, rel=1e-15)
    assert tables.upper_bound == pytest.approx(2.0)


def test_tables_default_time_step_rule():
    spec = toy_spec(f="2*x0", box=((-1.0, 1.0),))
    grid = make_grid(spec, 21)   # spacing 0.1, sampled drift bound 2
    tables = build_tables(spec, grid)
    assert tables.dt == pytest.approx(0.5 * 0.1 / 2.0)


def test_tables_feet_respect_linear_factor():
    # pure linear decay: foot of x is exp(-dt/2) x, no control dependence
    spec = toy_spec(f="0", A=[[0.5]], box=((-1.0, 1.0),))
    grid = make_grid(spec, 3)
    tables = build_tables(spec, grid, dt=0.2)
    values = grid.points[:, 0].copy()   # identity function on nodes
    foot_values = (values[tables.foot_idx[0, 0, 0, 0]] * tables.foot_wts[0, 0, 0, 0]).sum(-1)
    np.testing.assert_allclose(foot_values, math.exp(-0.1) * grid.points[:, 0], atol=1e-12)
