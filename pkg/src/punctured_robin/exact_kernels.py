"""Closed-form Laplace kernels for balls and exteriors of balls.

Conventions: ``G = S - H`` with the fundamental solution

    S(x, y) = -(1/2pi) ln|x - y|          (N = 2)
    S(x, y) = C_N |x - y|^(2 - N)         (N >= 3)

and ``R(x) = H(x, x)``.  Every function here broadcasts over leading axes of
its point arguments, whose last axis has length ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointsError, GeometryError, InvalidInputError

__all__ = [
    "KernelContext",
    "fundamental_solution",
    "grad_fundamental_solution",
    "green_exterior_ball",
    "grad_y_green_exterior_ball",
    "robin_exterior_ball",
    "regular_part_ball",
    "robin_ball",
]


@dataclass(frozen=True)
class KernelContext:
    """Dimension-dependent constants.

    Attributes
    ----------
    dim : int
        Space dimension, at least 2.
    omega_n : float
        Volume of the unit ball, ``pi^(N/2) / Gamma(N/2 + 1)``.
    c_n : float
        ``1 / (N (N-2) omega_n)``; infinite for ``N = 2``.
    d_n : float
        ``2 / (N omega_n)``, the curvature of the ball Robin function at
        its centre.
    """

    dim: int
    omega_n: float
    c_n: float
    d_n: float

    @classmethod
    def for_dim(cls, dim: int) -> "KernelContext":
        if int(dim) != dim or dim < 2:
            raise InvalidInputError(f"dimension must be an integer >= 2, got {dim!r}")
        dim = int(dim)
        omega = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
        c_n = math.inf if dim == 2 else 1.0 / (dim * (dim - 2) * omega)
        return cls(dim=dim, omega_n=omega, c_n=c_n, d_n=2.0 / (dim * omega))

    @property
    def surface_area(self) -> float:
        """Area of the unit sphere, ``N omega_n``."""
        return self.dim * self.omega_n


def _points(ctx: KernelContext, *arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.shape[-1:] != (ctx.dim,):
            raise InvalidInputError(
                f"expected points with last axis {ctx.dim}, got shape {a.shape}")
        out.append(a)
    return out


def fundamental_solution(x, y, ctx: KernelContext):
    """Return ``S(x, y)``."""
    x, y = _points(ctx, x, y)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("fundamental solution evaluated at x == y")
    if ctx.dim == 2:
        return -np.log(r) / (2 * np.pi)
    return ctx.c_n * r ** (2 - ctx.dim)


def grad_fundamental_solution(x, y, ctx: KernelContext):
    """Return the gradient of ``S(x, y)`` with respect to ``x``."""
    x, y = _points(ctx, x, y)
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("fundamental solution evaluated at x == y")
    return -d / (ctx.surface_area * r[..., None] ** ctx.dim)


def _outside_hole(x, eps, name):
    if not eps > 0:
        raise InvalidInputError(f"hole radius must be positive, got {eps!r}")
    if np.any(np.linalg.norm(x, axis=-1) <= eps):
        raise GeometryError(f"{name} must lie outside the closed ball of radius {eps}")


def _image_quadratic(x, y, eps):
    # ||x| y - eps^2 x/|x||^2, written so that it stays symmetric in x and y.
    xx = np.sum(x * x, axis=-1)
    yy = np.sum(y * y, axis=-1)
    xy = np.sum(x * y, axis=-1)
    return xx * yy - 2 * eps**2 * xy + eps**4


def green_exterior_ball(x, y, eps: float, ctx: KernelContext):
    """Green function of the exterior of the ball ``|z| <= eps``.

    Vanishes when either argument lies on ``|z| = eps``.
    """
    x, y = _points(ctx, x, y)
    _outside_hole(x, eps, "x")
    # Points placed on the sphere may round to just inside it.
    if np.any(np.linalg.norm(y, axis=-1) < eps * (1 - 1e-12)):
        raise GeometryError("y must lie outside the open ball of radius eps")
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("Green function evaluated at x == y")
    q = _image_quadratic(x, y, eps)
    if ctx.dim == 2:
        return -(np.log(r) - 0.5 * np.log(q) + math.log(eps)) / (2 * np.pi)
    p = ctx.dim - 2
    return ctx.c_n * (r ** (-p) - eps**p * q ** (-p / 2))


def grad_y_green_exterior_ball(x, y, eps: float, ctx: KernelContext):
    """Gradient in ``y`` of :func:`green_exterior_ball`."""
    x, y = _points(ctx, x, y)
    _outside_hole(x, eps, "x")
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("Green function evaluated at x == y")
    n = ctx.dim
    xx = np.sum(x * x, axis=-1)[..., None]
    q = _image_quadratic(x, y, eps)[..., None]
    image = eps ** (n - 2) * (xx * y - eps**2 * x) / q ** (n / 2)
    return (d / r[..., None] ** n + image) / ctx.surface_area


def robin_exterior_ball(x, eps: float, ctx: KernelContext, order: int = 0):
    """Robin function of the exterior of ``|z| <= eps`` and its derivatives.

    ``order`` selects the value (0), gradient (1) or Hessian (2).  The
    two-dimensional value is evaluated in log space, so ``eps`` may be as
    small as the smallest positive double.
    """
    (x,) = _points(ctx, x)
    _outside_hole(x, eps, "x")
    n = ctx.dim
    rho = np.linalg.norm(x, axis=-1)
    s = (rho - eps) * (rho + eps)
    if order == 0:
        if n == 2:
            return (math.log(eps) - np.log(s)) / (2 * np.pi)
        return ctx.c_n * (eps / s) ** (n - 2)
    scale = ctx.d_n * eps ** (n - 2)
    if order == 1:
        return -scale * x / s[..., None] ** (n - 1)
    if order == 2:
        eye = np.eye(n)
        outer = x[..., :, None] * x[..., None, :]
        num = eye * s[..., None, None] + 2 * (1 - n) * outer
        return -scale * num / s[..., None, None] ** n
    raise InvalidInputError(f"order must be 0, 1 or 2, got {order!r}")


def regular_part_ball(x, y, ctx: KernelContext, radius: float = 1.0):
    """Regular part ``H(x, y)`` of the Green function of ``|z| < radius``.

    Uses ``|y|^2 |x - y/|y|^2|^2 = |x|^2 |y|^2 - 2 x.y + 1`` on the unit
    ball, so the centre ``y = 0`` needs no special treatment.
    """
    if not radius > 0:
        raise InvalidInputError(f"radius must be positive, got {radius!r}")
    x, y = _points(ctx, x, y)
    xs, ys = x / radius, y / radius
    if np.any(np.linalg.norm(xs, axis=-1) > 1) or np.any(np.linalg.norm(ys, axis=-1) > 1):
        raise GeometryError("points must lie in the closed ball")
    q = np.sum(xs * xs, axis=-1) * np.sum(ys * ys, axis=-1) - 2 * np.sum(xs * ys, axis=-1) + 1
    if np.any(q <= 0):
        raise CoincidentPointsError("regular part is singular at a boundary point x == y")
    n = ctx.dim
    if n == 2:
        return -(0.5 * np.log(q) + math.log(radius)) / (2 * np.pi)
    return ctx.c_n * radius ** (2 - n) * q ** (-(n - 2) / 2)


def robin_ball(x, ctx: KernelContext, radius: float = 1.0, order: int = 0):
    """Robin function of ``|z| < radius`` and its derivatives.

    ``order`` selects the value (0), gradient (1) or Hessian (2).
    """
    if not radius > 0:
        raise InvalidInputError(f"radius must be positive, got {radius!r}")
    (x,) = _points(ctx, x)
    rho = np.linalg.norm(x, axis=-1)
    if np.any(rho >= radius):
        raise GeometryError("x must lie in the open ball")
    n = ctx.dim
    s = (radius - rho) * (radius + rho)
    if order == 0:
        if n == 2:
            return (math.log(radius) - np.log(s)) / (2 * np.pi)
        return ctx.c_n * (radius / s) ** (n - 2)
    scale = ctx.d_n * radius ** (n - 2)
    if order == 1:
        return scale * x / s[..., None] ** (n - 1)
    if order == 2:
        eye = np.eye(n)
        outer = x[..., :, None] * x[..., None, :]
        num = eye * s[..., None, None] + 2 * (n - 1) * outer
        return scale * num / s[..., None, None] ** n
    raise InvalidInputError(f"order must be 0, 1 or 2, got {order!r}")
