import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import fd_gradient, fd_jacobian
from punctured_robin.errors import CoincidentPointsError, GeometryError, InvalidInputError
from punctured_robin.exact_kernels import (KernelContext, fundamental_solution, grad_fundamental_solution,
                                           grad_y_green_exterior_ball, green_exterior_ball, regular_part_ball,
                                           robin_ball, robin_exterior_ball)

CTX2 = KernelContext.for_dim(2)
CTX3 = KernelContext.for_dim(3)


def unit(dim):
    return st.lists(st.floats(-1, 1), min_size=dim, max_size=dim).map(np.array).filter(
        lambda v: np.linalg.norm(v) > 0.1).map(lambda v: v / np.linalg.norm(v))


def test_constants():
    assert CTX2.omega_n == pytest.approx(math.pi)
    assert CTX3.omega_n == pytest.approx(4 * math.pi / 3)
    assert CTX2.c_n == math.inf
    assert CTX3.c_n == pytest.approx(1 / (4 * math.pi))
    assert CTX2.d_n == pytest.approx(1 / math.pi)
    assert CTX3.d_n == pytest.approx(1 / (2 * math.pi))
    assert KernelContext.for_dim(4).surface_area == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("dim", [1, 2.5, 0])
def test_bad_dimension(dim):
    with pytest.raises(InvalidInputError):
        KernelContext.for_dim(dim)


def test_fundamental_solution_values():
    assert fundamental_solution([1.0, 0.0], [0.0, 0.0], CTX2) == pytest.approx(0.0)
    assert fundamental_solution([math.e, 0.0], [0.0, 0.0], CTX2) == pytest.approx(-1 / (2 * math.pi))
    assert fundamental_solution([2.0, 0, 0], [0.0, 0, 0], CTX3) == pytest.approx(1 / (8 * math.pi))
    with pytest.raises(CoincidentPointsError):
        fundamental_solution([0.2, 0.1], [0.2, 0.1], CTX2)
    with pytest.raises(InvalidInputError):
        fundamental_solution([0.2, 0.1, 0.0], [0.2, 0.1], CTX2)


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
def test_fundamental_solution_gradient_matches_fd(ctx):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y = rng.normal(size=(2, ctx.dim))
        g = grad_fundamental_solution(x, y, ctx)
        assert np.allclose(g, fd_gradient(lambda z: fundamental_solution(z, y, ctx), x), rtol=1e-7, atol=1e-9)


@given(st.floats(0.01, 0.5), unit(2), unit(2), st.floats(1.05, 5), st.floats(1.05, 5))
def test_exterior_green_symmetric_and_zero_on_sphere(eps, u, v, a, b):
    x, y = a * eps * u, b * eps * v
    if np.linalg.norm(x - y) < 1e-6:
        return
    for ctx in (CTX2,):
        assert green_exterior_ball(x, y, eps, ctx) == pytest.approx(green_exterior_ball(y, x, eps, ctx), rel=1e-10, abs=1e-13)
        assert abs(green_exterior_ball(x, eps * v, eps, ctx)) < 1e-12


def test_exterior_green_zero_on_sphere_3d():
    rng = np.random.default_rng(3)
    eps = 0.2
    for _ in range(20):
        u, v = rng.normal(size=(2, 3))
        x = 3 * eps * u / np.linalg.norm(u)
        assert abs(green_exterior_ball(x, eps * v / np.linalg.norm(v), eps, CTX3)) < 1e-12


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
def test_exterior_green_gradient_matches_fd(ctx):
    rng = np.random.default_rng(1)
    eps = 0.3
    for _ in range(10):
        x = rng.normal(size=ctx.dim)
        x *= (1.5 * eps + rng.uniform()) / np.linalg.norm(x)
        y = rng.normal(size=ctx.dim)
        y *= (1.2 * eps + rng.uniform()) / np.linalg.norm(y)
        g = grad_y_green_exterior_ball(x, y, eps, ctx)
        fd = fd_gradient(lambda z: green_exterior_ball(x, z, eps, ctx), y)
        assert np.allclose(g, fd, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
def test_exterior_robin_is_diagonal_of_regular_part(ctx):
    eps = 0.25
    x = np.full(ctx.dim, 0.4)
    d = 1e-4 * np.eye(ctx.dim)[0]
    h = [fundamental_solution(x, x + s * d, ctx) - green_exterior_ball(x, x + s * d, eps, ctx) for s in (1, -1)]
    assert 0.5 * sum(h) == pytest.approx(robin_exterior_ball(x, eps, ctx), rel=1e-6)


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
def test_exterior_robin_derivatives_match_fd(ctx):
    eps = 0.2
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.normal(size=ctx.dim)
        x *= (1.3 * eps + rng.uniform()) / np.linalg.norm(x)
        g = robin_exterior_ball(x, eps, ctx, 1)
        H = robin_exterior_ball(x, eps, ctx, 2)
        assert np.allclose(g, fd_gradient(lambda z: robin_exterior_ball(z, eps, ctx), x), rtol=1e-7)
        fdH = fd_jacobian(lambda z: robin_exterior_ball(z, eps, ctx, 1), x, h=1e-6)
        assert np.allclose(H, fdH, rtol=1e-6, atol=1e-7 * np.abs(H).max())


def test_exterior_robin_tiny_eps_finite():
    v = robin_exterior_ball([0.5, 0.0], 1e-300, CTX2)
    assert np.isfinite(v) and v < -100


def test_exterior_errors():
    with pytest.raises(GeometryError):
        robin_exterior_ball([0.1, 0.0], 0.2, CTX2)
    with pytest.raises(InvalidInputError):
        robin_exterior_ball([1.0, 0.0], -0.2, CTX2)
    with pytest.raises(InvalidInputError):
        robin_exterior_ball([1.0, 0.0], 0.2, CTX2, order=3)
    with pytest.raises(CoincidentPointsError):
        green_exterior_ball([1.0, 0.0], [1.0, 0.0], 0.2, CTX2)


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
@pytest.mark.parametrize("radius", [1.0, 2.5])
def test_ball_robin_consistent_with_regular_part(ctx, radius):
    rng = np.random.default_rng(4)
    x = rng.uniform(-0.4, 0.4, size=(6, ctx.dim)) * radius
    assert np.allclose(regular_part_ball(x, x, ctx, radius), robin_ball(x, ctx, radius), rtol=1e-13)


def test_ball_regular_part_symmetric_and_centre():
    x, y = np.array([0.3, -0.2]), np.array([-0.5, 0.1])
    assert regular_part_ball(x, y, CTX2) == pytest.approx(regular_part_ball(y, x, CTX2))
    # H(x, 0) is constant in x: the Green function with pole 0 is -(1/2pi) ln|x|.
    assert regular_part_ball(x, np.zeros(2), CTX2) == pytest.approx(0.0, abs=1e-15)
    assert regular_part_ball(x, np.zeros(2), CTX2, radius=2.0) == pytest.approx(-math.log(2) / (2 * math.pi))


@pytest.mark.parametrize("ctx", [CTX2, CTX3])
def test_ball_robin_derivatives(ctx):
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = rng.uniform(-0.5, 0.5, size=ctx.dim)
        g = robin_ball(x, ctx, 1.0, 1)
        H = robin_ball(x, ctx, 1.0, 2)
        assert np.allclose(g, fd_gradient(lambda z: robin_ball(z, ctx), x), rtol=1e-7, atol=1e-10)
        assert np.allclose(H, fd_jacobian(lambda z: robin_ball(z, ctx, 1.0, 1), x, h=1e-6), rtol=1e-6)
    assert np.allclose(robin_ball(np.zeros(ctx.dim), ctx, order=2), ctx.d_n * np.eye(ctx.dim))


def test_ball_closed_forms():
    assert robin_ball([0.5, 0.0], CTX2) == pytest.approx(-math.log(0.75) / (2 * math.pi))
    assert robin_ball([0.5, 0, 0], CTX3) == pytest.approx(1 / (4 * math.pi * 0.75))
    with pytest.raises(GeometryError):
        robin_ball([1.0, 0.0], CTX2)


def test_broadcasting():
    x = np.random.default_rng(6).uniform(-0.5, 0.5, size=(4, 5, 2))
    assert robin_ball(x, CTX2).shape == (4, 5)
    assert robin_ball(x, CTX2, order=1).shape == (4, 5, 2)
    assert robin_ball(x, CTX2, order=2).shape == (4, 5, 2, 2)


def test_exterior_green_image_value_3d():
    # image of y = (-2, 0, 0) in the unit sphere is (-1/2, 0, 0), with weight 1/|y| = 1/2
    expected = (1 / 4 - 0.5 / 2.5) / (4 * math.pi)
    assert green_exterior_ball([2.0, 0, 0], [-2.0, 0, 0], 1.0, CTX3) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.0039789, abs=1e-7)
