"""Bounded domains, star-shaped about the origin, and punctured versions.

Every outer domain is described by its radial function ``r(u)``: the
boundary point in the unit direction ``u`` is ``r(u) u``.  This gives cheap
membership tests, dilated charge curves for the method of fundamental
solutions, and surface quadrature via ``dS = r^(N-1) dOmega / (u . nu)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InvalidInputError, UnsupportedCaseError

__all__ = [
    "Ball",
    "PerturbedEllipsoid",
    "StarShaped2D",
    "PuncturedDomain",
    "fibonacci_sphere",
    "unit_directions",
    "ValidityWarning",
]


class ValidityWarning(UserWarning):
    """A configuration lies outside the regime the solver was tuned for."""


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors on the 2-sphere (golden-angle spiral)."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = math.pi * (3 - math.sqrt(5)) * k
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def unit_directions(dim: int, n: int, offset: float = 0.0) -> np.ndarray:
    """``n`` well-spread unit directions in dimension 2 or 3.

    In two dimensions the angles are ``2 pi (k + offset) / n``; in three
    dimensions ``offset`` rotates the spiral about the vertical axis.
    """
    if dim == 2:
        t = 2 * np.pi * (np.arange(n) + offset) / n
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if dim == 3:
        u = fibonacci_sphere(n)
        if offset:
            c, s = math.cos(2 * math.pi * offset / n), math.sin(2 * math.pi * offset / n)
            rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
            u = u @ rot.T
        return u
    raise UnsupportedCaseError(f"boundary discretisation is only available for N = 2, 3 (got {dim})")


def _sphere_product_rule(n_theta: int):
    """Gauss-Legendre in cos(theta) times trapezoid in phi on the unit sphere."""
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - t * t)
    u = np.stack([
        np.outer(st, np.cos(phi)).ravel(),
        np.outer(st, np.sin(phi)).ravel(),
        np.repeat(t, n_phi),
    ], axis=-1)
    w = np.repeat(wt, n_phi) * (2 * np.pi / n_phi)
    return u, w


class _StarDomain:
    """Shared machinery for domains given by a radial function."""

    dim: int

    def boundary_radius(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        u = unit_directions(self.dim, 720 if self.dim == 2 else 2000)
        return 2 * float(np.max(self.boundary_radius(u)))

    def radial_fraction(self, x) -> np.ndarray:
        """``|x| / r(x/|x|)``; below one exactly inside the domain."""
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        u = x / safe[..., None]
        u = np.where((rho > 0)[..., None], u, np.eye(self.dim)[0])
        return rho / self.boundary_radius(u)

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        """Strict membership, optionally keeping ``margin`` from the boundary."""
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        u = np.where((rho > 0)[..., None], x / safe[..., None], np.eye(self.dim)[0])
        return rho < self.boundary_radius(u) - margin

    def boundary_points(self, n: int, offset: float = 0.0) -> np.ndarray:
        u = unit_directions(self.dim, n, offset)
        return self.boundary_radius(u)[:, None] * u

    def charge_points(self, n: int, dilation: float) -> np.ndarray:
        return dilation * self.boundary_points(n, 0.25)

    def boundary_quadrature(self, n: int):
        """Nodes, outward unit normals and weights for surface integrals.

        ``n`` is the number of trapezoid nodes (N = 2) or Gauss nodes in
        the polar angle (N = 3).
        """
        if self.dim == 2:
            u = unit_directions(2, n)
            w = np.full(n, 2 * np.pi / n)
        elif self.dim == 3:
            u, w = _sphere_product_rule(n)
        else:
            raise UnsupportedCaseError("surface quadrature needs N = 2 or 3")
        r = self.boundary_radius(u)
        nu = self.normal(u)
        cos = np.sum(u * nu, axis=-1)
        return r[:, None] * u, nu, w * r ** (self.dim - 1) / cos


@dataclass(frozen=True)
class Ball(_StarDomain):
    """Ball of the given radius centred at the origin."""

    radius: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius!r}")
        if self.dim < 2:
            raise InvalidInputError(f"dimension must be at least 2, got {self.dim!r}")

    def boundary_radius(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1], float(self.radius))

    def normal(self, u):
        return np.asarray(u, dtype=float)

    @property
    def diameter(self) -> float:
        return 2 * float(self.radius)


@dataclass(frozen=True)
class PerturbedEllipsoid(_StarDomain):
    """The ellipsoid ``sum_i x_i^2 (1 + alpha_i delta)^2 < 1``."""

    alpha: tuple
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) < 2:
            raise InvalidInputError("alpha needs one entry per dimension (at least 2)")
        scale = np.asarray(self.scales)
        if not np.all(scale > 0):
            raise InvalidInputError("every 1 + alpha_i delta must be positive")

    @property
    def dim(self) -> int:
        return len(self.alpha)

    @property
    def scales(self) -> tuple:
        """The factors ``1 + alpha_i delta``; the semi-axes are their inverses."""
        return tuple(1 + a * self.delta for a in self.alpha)

    def boundary_radius(self, u):
        c = np.asarray(self.scales)
        return 1 / np.sqrt(np.sum((np.asarray(u, dtype=float) * c) ** 2, axis=-1))

    def normal(self, u):
        c2 = np.asarray(self.scales) ** 2
        g = np.asarray(u, dtype=float) * c2
        return g / np.linalg.norm(g, axis=-1, keepdims=True)


@dataclass(frozen=True)
class StarShaped2D(_StarDomain):
    """Planar domain ``|x| < r(theta)`` with ``r`` a trigonometric polynomial.

    ``coeffs = (c0, a1, b1, a2, b2, ...)`` gives
    ``r(theta) = c0 + sum_k a_k cos(k theta) + b_k sin(k theta)``.  The
    solver assumes the coefficients decay at least geometrically; rough
    boundaries need many more collocation points than the defaults.
    """

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) == 0 or len(self.coeffs) % 2 == 0:
            raise InvalidInputError("coeffs must have odd length (c0, a1, b1, ...)")
        t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        if not np.all(self._r(t) > 0):
            raise InvalidInputError("radial function must stay positive")

    dim = 2

    def _r(self, t, derivative=False):
        c = self.coeffs
        out = np.zeros_like(t) if derivative else np.full_like(t, c[0])
        for k in range(1, (len(c) - 1) // 2 + 1):
            a, b = c[2 * k - 1], c[2 * k]
            if derivative:
                out = out + k * (-a * np.sin(k * t) + b * np.cos(k * t))
            else:
                out = out + a * np.cos(k * t) + b * np.sin(k * t)
        return out

    def boundary_radius(self, u):
        u = np.asarray(u, dtype=float)
        return self._r(np.arctan2(u[..., 1], u[..., 0]))

    def normal(self, u):
        u = np.asarray(u, dtype=float)
        t = np.arctan2(u[..., 1], u[..., 0])
        r, dr = self._r(t), self._r(t, derivative=True)
        tangent_perp = np.stack([r * u[..., 0] + dr * u[..., 1],
                                 r * u[..., 1] - dr * u[..., 0]], axis=-1)
        return tangent_perp / np.linalg.norm(tangent_perp, axis=-1, keepdims=True)


@dataclass(frozen=True)
class PuncturedDomain:
    """An outer domain with the closed ball ``|x - P| <= eps`` removed."""

    outer: _StarDomain
    hole_center: tuple
    hole_radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.ravel(self.hole_center))
        object.__setattr__(self, "hole_center", center)
        if len(center) != self.outer.dim:
            raise InvalidInputError("hole centre has the wrong dimension")
        if not self.hole_radius > 0:
            raise InvalidInputError(f"hole radius must be positive, got {self.hole_radius!r}")
        if self.outer.dim in (2, 3):
            rim = np.asarray(center) + self.hole_radius * unit_directions(self.outer.dim, 512)
            if not np.all(self.outer.contains(rim)) or not self.outer.contains(np.asarray(center)):
                raise GeometryError("the closed hole must lie inside the outer domain")
        if self.hole_radius < 1e-3 * self.outer.diameter:
            warnings.warn(
                "hole radius below 1e-3 * diameter; collocation accuracy is not guaranteed",
                ValidityWarning, stacklevel=2)

    @property
    def dim(self) -> int:
        return self.outer.dim

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.hole_center)

    @property
    def diameter(self) -> float:
        return self.outer.diameter

    def contains(self, x, margin: float = 0.0, hole_margin: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        off = np.linalg.norm(x - self.center, axis=-1)
        return self.outer.contains(x, margin) & (off > self.hole_radius + hole_margin)
