from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemopersist.grid import (
    build_grid,
    default_strides,
    divergence_faces,
    gradient_faces,
    holder_seminorm,
    integrate,
    laplacian_neumann,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_build_grid_1d():
    g = build_grid(1, [1.0], [100])
    assert g.spacing == pytest.approx((0.01,))
    assert g.volume == 1.0


def test_build_grid_2d():
    g = build_grid(2, [2.0, 1.0], [40, 20])
    assert g.spacing == pytest.approx((0.05, 0.05))
    assert g.volume == 2.0
    assert g.cell_volume == pytest.approx(0.0025)


@pytest.mark.parametrize("args", [
    (1, [1.0], [2]),
    (3, [1.0] * 3, [4] * 3),
    (1, [0.0], [10]),
    (1, [-1.0], [10]),
    (2, [1.0], [10]),
])
def test_build_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_field_rejects_nonfinite():
    g = build_grid(1, [1.0], [4])
    with pytest.raises(FloatingPointError):
        g.field([0.0, np.nan, 1.0, 2.0])
    with pytest.raises(ValueError):
        g.field([1.0, 2.0])


def test_integrate_constant():
    g = build_grid(2, [2.0, 1.0], [8, 5])
    assert integrate(g, g.constant(3.5)) == pytest.approx(7.0, rel=1e-15)


def test_integrate_sine_period_cancels():
    g = build_grid(1, [1.0], [100])
    (x,) = g.centers()
    assert abs(integrate(g, np.sin(2 * np.pi * x))) < 1e-12


def test_integrate_second_order():
    errors = []
    for n in (50, 100, 200):
        g = build_grid(1, [1.0], [n])
        (x,) = g.centers()
        errors.append(abs(integrate(g, x**2) - 1.0 / 3.0))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_integrate_second_order_nonpolynomial():
    errors = []
    for n in (40, 80, 160):
        g = build_grid(2, [1.0, 2.0], [n, n])
        x, y = g.centers()
        exact = (np.e - 1.0) * (1.0 - np.cos(2.0))
        errors.append(abs(integrate(g, np.exp(x) * np.sin(y)) - exact))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 <= coarse / fine <= 4.5


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_kills_constants(dim):
    g = build_grid(dim, [1.3] * dim, [7] * dim)
    assert np.array_equal(laplacian_neumann(g, g.constant(2.5)), np.zeros(g.shape))


@pytest.mark.parametrize("n,L", [(16, 1.0), (50, 2.5)])
def test_laplacian_cosine_eigenfield(n, L):
    g = build_grid(1, [L], [n])
    (x,) = g.centers()
    h = g.spacing[0]
    f = np.cos(np.pi * x / L)
    lam_h = (2.0 / h**2) * (1.0 - np.cos(np.pi * h / L))
    assert np.max(np.abs(laplacian_neumann(g, f) + lam_h * f)) < 1e-10


def test_laplacian_2d_separable_eigenfield():
    g = build_grid(2, [1.0, 2.0], [12, 10])
    x, y = g.centers()
    hx, hy = g.spacing
    f = np.cos(np.pi * x) * np.cos(2 * np.pi * y / 2.0)
    lam = (2 / hx**2) * (1 - np.cos(np.pi * hx)) + (2 / hy**2) * (1 - np.cos(2 * np.pi * hy / 2.0))
    assert np.max(np.abs(laplacian_neumann(g, f) + lam * f)) < 1e-9


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_symmetric(dim, rng):
    g = build_grid(dim, [1.0] * dim, [9] * dim)
    f, k = rng.normal(size=g.shape), rng.normal(size=g.shape)
    assert np.sum(f * laplacian_neumann(g, k)) == pytest.approx(np.sum(k * laplacian_neumann(g, f)), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 5), elements=finite))
def test_discrete_divergence_theorem(values):
    g = build_grid(2, [1.0, 0.7], [6, 5])
    scale = max(1.0, float(np.max(np.abs(values))))
    lap = laplacian_neumann(g, values)
    assert abs(integrate(g, lap)) <= 1e-12 * scale / min(g.spacing) ** 2


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 11, elements=finite))
def test_divergence_of_gradient_is_laplacian_1d(values):
    g = build_grid(1, [1.0], [11])
    lhs = divergence_faces(g, gradient_faces(g, values))
    scale = max(1.0, float(np.max(np.abs(values)))) / g.spacing[0] ** 2
    assert np.max(np.abs(lhs - laplacian_neumann(g, values))) <= 1e-14 * scale


def test_divergence_of_gradient_is_laplacian_2d(rng):
    g = build_grid(2, [1.0, 1.0], [7, 9])
    f = rng.uniform(-1, 1, g.shape)
    lhs = divergence_faces(g, gradient_faces(g, f))
    assert np.max(np.abs(lhs - laplacian_neumann(g, f))) <= 1e-14 / min(g.spacing) ** 2


def test_gradient_faces_constant_and_linear():
    g = build_grid(1, [1.0], [10])
    (zero,) = gradient_faces(g, g.constant(4.0))
    assert np.array_equal(zero, np.zeros(11))
    (x,) = g.centers()
    (grad,) = gradient_faces(g, x)
    assert grad[0] == 0.0 and grad[-1] == 0.0
    np.testing.assert_allclose(grad[1:-1], 1.0, rtol=1e-12)


def test_gradient_faces_shapes_2d():
    g = build_grid(2, [1.0, 1.0], [4, 6])
    gx, gy = gradient_faces(g, np.ones(g.shape))
    assert gx.shape == (5, 6) and gy.shape == (4, 7)


def test_divergence_zero_flux():
    g = build_grid(2, [1.0, 1.0], [4, 5])
    assert np.array_equal(divergence_faces(g, (np.zeros((5, 5)), np.zeros((4, 6)))), np.zeros(g.shape))


def test_divergence_single_face():
    g = build_grid(1, [1.0], [8])
    h = g.spacing[0]
    i = 3
    flux = np.zeros(9)
    flux[i] = 1.0
    (div,) = (divergence_faces(g, (flux,)),)
    expected = np.zeros(8)
    expected[i - 1] = 1.0 / h
    expected[i] = -1.0 / h
    np.testing.assert_allclose(div, expected, rtol=1e-14)


def test_divergence_conserves(rng):
    g = build_grid(2, [1.0, 2.0], [6, 7])
    fx = np.pad(rng.normal(size=(5, 7)), ((1, 1), (0, 0)))
    fy = np.pad(rng.normal(size=(6, 6)), ((0, 0), (1, 1)))
    assert abs(integrate(g, divergence_faces(g, (fx, fy)))) < 1e-12


def test_divergence_rejects_boundary_flux():
    g = build_grid(1, [1.0], [5])
    flux = np.zeros(6)
    flux[0] = 0.1
    with pytest.raises(ValueError):
        divergence_faces(g, (flux,))


def test_holder_constant_is_zero():
    g = build_grid(2, [1.0, 1.0], [8, 8])
    assert holder_seminorm(g, g.constant(3.0), 0.3) == 0.0


def test_holder_linear_full_width():
    g = build_grid(1, [1.0], [64])
    (x,) = g.centers()
    # widest sampled pair spans n - 1 cells: |x_n - x_1| = 1 - h
    value = holder_seminorm(g, x, 0.5)
    assert value == pytest.approx((1 - g.spacing[0]) ** 0.5, rel=1e-12)
    assert value >= 1.0 - g.spacing[0]


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.2, 1.5])
def test_holder_rejects_theta(theta):
    g = build_grid(1, [1.0], [8])
    with pytest.raises(ValueError):
        holder_seminorm(g, np.ones(8), theta)


def test_holder_monotone_in_strides(rng):
    g = build_grid(2, [1.0, 1.0], [16, 16])
    f = rng.uniform(size=g.shape)
    strides = default_strides(g)
    values = [holder_seminorm(g, f, 0.4, strides[:k]) for k in range(1, len(strides) + 1)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite))
def test_holder_subadditive(f, k):
    g = build_grid(1, [1.0], [12])
    lhs = holder_seminorm(g, f + k, 0.3)
    rhs = holder_seminorm(g, f, 0.3) + holder_seminorm(g, k, 0.3)
    assert lhs <= rhs * (1 + 1e-12) + 1e-9
