import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxlap.errors import ExponentDomain, NonPositiveExtent, TooCoarse
from pxlap.grid import (
    Domain,
    ScalarField,
    build_grid,
    gradient_components,
    integrate_power,
    power_abs,
    read_snapshot,
    write_snapshot,
)

finite = st.floats(-10, 10, allow_nan=False)


def field(grid, fn):
    return ScalarField(grid, fn(*grid.coordinates()))


def test_unit_interval_nodes():
    grid = build_grid(Domain((0,), (1,)), [4])
    np.testing.assert_array_equal(grid.axis(0), [0, 0.25, 0.5, 0.75, 1.0])
    assert grid.node_count == 5
    assert grid.h == (0.25,)


def test_square_has_one_interior_node():
    grid = build_grid(Domain((0, 0), (1, 1)), [2, 2])
    assert grid.node_count == 9
    inner = grid.interior_mask()
    assert inner.sum() == 1
    x, y = grid.coordinates()
    assert (x[inner][0], y[inner][0]) == (0.5, 0.5)
    assert grid.boundary_mask().sum() == 8


def test_too_coarse():
    with pytest.raises(TooCoarse):
        build_grid(Domain((0,), (1,)), [0])
    with pytest.raises(TooCoarse):
        build_grid(Domain((0,), (1,)), [1])


def test_non_positive_extent():
    with pytest.raises(NonPositiveExtent):
        Domain((0, 1), (1, 1))
    with pytest.raises(NonPositiveExtent):
        Domain((2,), (1,))


def test_node_coordinates_reproducible():
    grid = build_grid(Domain((-1, 2), (3, 2.5)), [8, 5])
    for i in range(2):
        k = np.arange(grid.counts[i] + 1)
        np.testing.assert_array_equal(grid.axis(i), grid.domain.lower[i] + k * grid.h[i])


def test_gradient_affine_exact():
    grid = build_grid(Domain((0,), (1,)), [7])
    (g,) = gradient_components(field(grid, lambda x: 2 * x))
    np.testing.assert_allclose(g.values, 2.0, rtol=0, atol=1e-13)


def test_gradient_constant_zero():
    grid = build_grid(Domain((0, 0), (1, 2)), [4, 6])
    for g in gradient_components(field(grid, lambda x, y: 7 + 0 * x)):
        assert np.all(g.values == 0)


def test_gradient_central_quotient():
    grid = build_grid(Domain((0,), (1,)), [4])
    (g,) = gradient_components(field(grid, lambda x: x**2))
    assert g.values[2] == 1.0


def test_gradient_affine_exact_3d():
    grid = build_grid(Domain((0, 0, 0), (1, 2, 3)), [3, 4, 5])
    gs = gradient_components(field(grid, lambda x, y, z: 1 + 2 * x - 3 * y + 0.5 * z))
    for g, c in zip(gs, (2, -3, 0.5)):
        np.testing.assert_allclose(g.values, c, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(finite, finite, st.integers(0, 2**32 - 1))
def test_gradient_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(Domain((0, 0), (1, 1)), [5, 4])
    u = rng.normal(size=grid.shape)
    v = rng.normal(size=grid.shape)
    lhs = gradient_components(ScalarField(grid, a * u + b * v))
    gu = gradient_components(ScalarField(grid, u))
    gv = gradient_components(ScalarField(grid, v))
    for l, x, y in zip(lhs, gu, gv):
        np.testing.assert_allclose(l.values, a * x.values + b * y.values, atol=1e-11)


def test_integrate_power_unit_integrand():
    grid = build_grid(Domain((0, 0), (2, 3)), [6, 5])
    one = ScalarField(grid, np.ones(grid.shape))
    s = field(grid, lambda x, y: 1 + x * y)
    assert integrate_power(one, s) == pytest.approx(6.0, rel=1e-14)


def test_integrate_power_zero_integrand():
    grid = build_grid(Domain((0,), (1,)), [8])
    zero = ScalarField(grid, np.zeros(grid.shape))
    assert integrate_power(zero, 2.0) == 0.0


def test_integrate_power_square():
    grid = build_grid(Domain((0,), (1,)), [64])
    assert abs(integrate_power(field(grid, lambda x: x), 2.0) - 1 / 3) <= 1e-3


def test_integrate_power_order_two():
    errs = []
    for c in (16, 32, 64):
        grid = build_grid(Domain((0,), (1,)), [c])
        g = field(grid, lambda x: np.sin(x) + 1.5)
        s = field(grid, lambda x: 1 + x)
        # reference: fine-grid Simpson
        xf = np.linspace(0, 1, 20001)
        yf = (np.sin(xf) + 1.5) ** (1 + xf)
        ref = (xf[1] - xf[0]) / 3 * (yf[0] + yf[-1] + 4 * yf[1:-1:2].sum() + 2 * yf[2:-1:2].sum())
        errs.append(abs(integrate_power(g, s) - ref))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_integrate_power_monotone(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(Domain((0,), (1,)), [10])
    g1 = rng.normal(size=grid.shape)
    g2 = np.abs(g1) + rng.uniform(0, 1, size=grid.shape)
    s = rng.uniform(0.1, 3, size=grid.shape)
    assert integrate_power(ScalarField(grid, g1), s) <= integrate_power(ScalarField(grid, g2), s)


def test_power_abs_zero_base():
    assert power_abs(np.array([0.0, 2.0]), np.array([0.5, 2.0])).tolist() == [0.0, 4.0]
    with pytest.raises(ExponentDomain):
        power_abs(np.array([0.0]), np.array([0.0]))
    with pytest.raises(ExponentDomain):
        power_abs(np.array([0.0]), np.array([-0.5]))


def test_field_rejects_wrong_size_and_nonfinite():
    grid = build_grid(Domain((0,), (1,)), [4])
    with pytest.raises(ValueError):
        ScalarField(grid, np.zeros(4))
    with pytest.raises(Exception):
        ScalarField(grid, [0, 1, np.nan, 0, 0])


def test_field_is_read_only():
    grid = build_grid(Domain((0,), (1,)), [4])
    u = ScalarField(grid, np.zeros(5))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_snapshot_round_trip(tmp_path):
    grid = build_grid(Domain((0, -1), (1, 2)), [3, 4])
    u = field(grid, lambda x, y: np.sin(x) * np.exp(y) / 3)
    path = tmp_path / "s.csv"
    write_snapshot(path, 0.1 / 3, u)
    assert path.read_text().startswith(f"# t={0.1 / 3!r} n=2 counts=3,4\n")
    t, v = read_snapshot(path)
    assert t == 0.1 / 3
    np.testing.assert_array_equal(v.values, u.values)
    assert v.grid.counts == grid.counts
    np.testing.assert_allclose(v.grid.h, grid.h, rtol=1e-15)
    t2, w = read_snapshot(path, grid)
    assert w.grid is grid and np.array_equal(w.values, u.values)
