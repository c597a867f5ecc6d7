import math
import warnings

import numpy as np
import pytest
from scipy.special import ellipe

from punctured_robin.domains import (Ball, PerturbedEllipsoid, PuncturedDomain, StarShaped2D,
                                     ValidityWarning, fibonacci_sphere, unit_directions)
from punctured_robin.errors import GeometryError, InvalidInputError, UnsupportedCaseError


def test_unit_directions():
    u = unit_directions(2, 8)
    assert np.allclose(np.linalg.norm(u, axis=1), 1)
    assert np.allclose(u[2], [0, 1])
    v = fibonacci_sphere(500)
    assert np.allclose(np.linalg.norm(v, axis=1), 1)
    assert np.allclose(v.mean(axis=0), 0, atol=5e-3)
    with pytest.raises(UnsupportedCaseError):
        unit_directions(4, 10)


def test_ball_membership_and_diameter():
    b = Ball(2.0)
    assert b.diameter == 4.0
    assert list(b.contains(np.array([[1.9, 0], [2.1, 0], [0, 0]]))) == [True, False, True]
    assert not b.contains(np.array([1.9, 0.0]), margin=0.2)
    with pytest.raises(InvalidInputError):
        Ball(-1.0)


def test_perimeter_quadrature_matches_elliptic_integral():
    # semi-axes 1/(1 + alpha_i delta); perimeter 4 a E(1 - b^2/a^2)
    dom = PerturbedEllipsoid((1.0, 3.0), 0.1)
    a, b = 1 / 1.1, 1 / 1.3
    _, _, w = dom.boundary_quadrature(256)
    assert w.sum() == pytest.approx(4 * a * ellipe(1 - (b / a) ** 2), rel=1e-12)


def test_sphere_area_and_normals():
    nodes, nu, w = Ball(1.5, dim=3).boundary_quadrature(24)
    assert w.sum() == pytest.approx(4 * math.pi * 1.5**2, rel=1e-13)
    assert np.allclose(nu, nodes / 1.5)


def test_ellipsoid_normals_are_gradients():
    dom = PerturbedEllipsoid((1.0, 2.0, 3.0), 0.05)
    nodes, nu, _ = dom.boundary_quadrature(8)
    c2 = np.asarray(dom.scales) ** 2
    grad = nodes * c2
    assert np.allclose(nu, grad / np.linalg.norm(grad, axis=1, keepdims=True))
    # boundary points satisfy the defining equation
    assert np.allclose(np.sum((nodes * np.asarray(dom.scales)) ** 2, axis=1), 1)


def test_star_shaped_domain():
    dom = StarShaped2D((1.0, 0.1, 0.0, 0.0, 0.05))
    assert dom.dim == 2
    nodes, nu, w = dom.boundary_quadrature(512)
    # Green: the area is (1/2) * integral of x . nu
    area = 0.5 * np.sum(np.sum(nodes * nu, axis=1) * w)
    assert area == pytest.approx(math.pi * (1 + 0.5 * (0.1**2 + 0.05**2)), rel=1e-12)
    with pytest.raises(InvalidInputError):
        StarShaped2D((1.0, 0.2))
    with pytest.raises(InvalidInputError):
        StarShaped2D((0.5, 0.9, 0.0))


def test_punctured_domain_validation():
    pd = PuncturedDomain(Ball(), (0.3, 0.0), 0.1)
    assert pd.dim == 2 and np.allclose(pd.center, [0.3, 0])
    assert list(pd.contains(np.array([[0.3, 0.05], [0.6, 0.0]]))) == [False, True]
    with pytest.raises(GeometryError):
        PuncturedDomain(Ball(), (0.95, 0.0), 0.1)
    with pytest.raises(InvalidInputError):
        PuncturedDomain(Ball(), (0.0, 0.0, 0.0), 0.1)
    with pytest.raises(InvalidInputError):
        PuncturedDomain(Ball(), (0.0, 0.0), 0.0)


def test_tiny_hole_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        PuncturedDomain(Ball(), (0.0, 0.0), 1e-4)
    assert any(issubclass(r.category, ValidityWarning) for r in rec)
