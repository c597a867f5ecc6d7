"""Boundary-integral identities on small spheres, checked by quadrature.

Each identity integrates a kernel of the exterior or interior ball over
``|y| = eps`` and compares with a closed form.  The quadrature is
spectrally accurate for smooth integrands: the trapezoid rule on circles
and a Gauss-Legendre (in ``cos theta``) by trapezoid (in ``phi``) product
rule on spheres.  Node counts double until two successive values agree to
``1e-12`` relative to the size of the integrand.

Normals on ``|y| = eps`` point out of the exterior domain, ``nu = -y/eps``,
except for the interior Poisson identity ``aar`` which uses ``+y/eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domains import _sphere_product_rule, unit_directions
from .errors import InvalidInputError, NonConvergenceError, UnsupportedCaseError
from .exact_kernels import (KernelContext, fundamental_solution, grad_y_green_exterior_ball,
                            robin_exterior_ball)

__all__ = [
    "IdentityCheck",
    "IDENTITIES",
    "quadrature_sphere",
    "integrate_converged",
    "check_identity",
    "sample_points",
    "run_suite",
]

EQUALITY_TOL = 1e-10
DEFAULT_SEED = 20240611


@dataclass
class IdentityCheck:
    """Result of one identity evaluation.

    ``lhs_quadrature`` and ``rhs_closed_form`` are scalars or arrays.
    ``rel_err`` divides ``abs_err`` by ``max(|rhs|, integral of |integrand|)``
    so components that vanish by cancellation are measured on the scale of
    the integrand.  Bound identities (``kind == "bound"``) report
    ``ratio = lhs / rhs`` instead and leave ``rel_err`` as ``nan``.
    """

    name: str
    dim: int
    x: tuple
    eps: float
    lhs_quadrature: object
    rhs_closed_form: object
    abs_err: float
    rel_err: float
    nodes_used: int
    kind: str = "equality"
    ratio: float = math.nan

    @property
    def passed(self) -> bool:
        if self.kind == "bound":
            return bool(np.isfinite(self.ratio))
        return self.rel_err <= EQUALITY_TOL


def _rule(dim, nodes):
    if dim == 2:
        return unit_directions(2, nodes), np.full(nodes, 2 * np.pi / nodes)
    if dim == 3:
        return _sphere_product_rule(nodes)
    raise UnsupportedCaseError("sphere quadrature is available for N = 2 and 3")


def quadrature_sphere(f: Callable, eps: float, dim: int, nodes: int):
    """Integrate ``f`` over ``|y| = eps``.

    ``f`` maps points of shape (M, N) to values of shape (M,) or (M, ...).
    ``nodes`` is the number of trapezoid points (N = 2) or of Gauss points
    in the polar angle (N = 3, with twice as many azimuthal points).

    Examples
    --------
    >>> round(quadrature_sphere(lambda y: np.ones(len(y)), 0.5, 2, 64), 12)
    3.14159265359
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps!r}")
    u, w = _rule(dim, nodes)
    vals = np.asarray(f(eps * u), dtype=float)
    w = w * eps ** (dim - 1)
    out = np.tensordot(w, vals, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def integrate_converged(f: Callable, eps: float, dim: int, tol: float = 1e-12, max_nodes: int | None = None):
    """Node doubling until successive values agree to ``tol``.

    Returns ``(value, abs_value, nodes)`` where ``abs_value`` integrates
    ``|f|`` on the final rule and sets the scale of the tolerance.
    """
    n = 64 if dim == 2 else 32
    max_nodes = max_nodes or (1 << 17 if dim == 2 else 1024)
    prev = quadrature_sphere(f, eps, dim, n)
    while True:
        n *= 2
        cur = quadrature_sphere(f, eps, dim, n)
        scale = np.max(quadrature_sphere(lambda y: np.abs(f(y)), eps, dim, n))
        if np.max(np.abs(cur - prev)) <= tol * max(scale, np.finfo(float).tiny):
            return cur, float(scale), n
        if n >= max_nodes:
            raise NonConvergenceError(f"quadrature did not converge with {n} nodes")
        prev = cur


def _dn_exterior(x, eps, ctx):
    # Normal derivative of G_{B_eps^c}(x, .) on |y| = eps, outward normal -y/eps.
    def g(y):
        grad = grad_y_green_exterior_ball(np.broadcast_to(x, y.shape), y, eps, ctx)
        return -np.sum(grad * y, axis=-1) / eps
    return g


def _poisson_exterior(x, eps, ctx):
    # The same normal derivative written as a Poisson kernel.
    def g(y):
        r = np.linalg.norm(x - y, axis=-1)
        return (eps**2 - x @ x) / (ctx.surface_area * eps * r**ctx.dim)
    return g


def _identity(name, x, eps, ctx):
    """Integrand and closed form of a named identity."""
    n = ctx.dim
    rho = float(np.linalg.norm(x))
    if name == "aar":
        if rho >= eps:
            raise InvalidInputError("aar needs x inside the ball |x| < eps")
        # u(y) = y_1 y_2 + y_1 - 0.3, harmonic in every dimension
        u = lambda y: y[..., 0] * y[..., 1] + y[..., 0] - 0.3
        def f(y):
            r = np.linalg.norm(x - y, axis=-1)
            return (eps**2 - rho**2) / (ctx.surface_area * eps) * u(y) / r**n
        return f, u(x), "equality"
    if rho <= eps:
        raise InvalidInputError(f"{name} needs |x| > eps")
    dn = _dn_exterior(x, eps, ctx)
    if name == "ap1":
        return dn, -(eps / rho) ** (n - 2), "equality"
    if name == "ap2":
        return (lambda y: y * dn(y)[:, None]), -x * eps**n / rho**n, "equality"
    if name == "ap10":
        rhs = -(eps / rho) ** n * (eps**2 * np.outer(x, x) / rho**2 + np.eye(n) * (rho**2 - eps**2) / n)
        return (lambda y: y[:, :, None] * y[:, None, :] * dn(y)[:, None, None]), rhs, "equality"
    if name == "lap1":
        rhs = -robin_exterior_ball(x, eps, ctx, order=1)
        return (lambda y: y / eps * dn(y)[:, None] ** 2), rhs, "equality"
    if name == "grad_rep":
        pk = _poisson_exterior(x, eps, ctx)
        rhs = robin_exterior_ball(x, eps, ctx, order=1)
        return (lambda y: -y / eps * pk(y)[:, None] ** 2), rhs, "equality"
    if name == "lap2":
        rhs = float(robin_exterior_ball(x, eps, ctx))
        if n == 2:
            rhs += math.log(rho / eps) / (2 * math.pi)
        f = lambda y: -dn(y) * fundamental_solution(np.broadcast_to(x, y.shape), y, ctx)
        return f, rhs, "equality"
    if name == "ap5":
        if n < 3:
            raise InvalidInputError("ap5 needs N >= 3")
        f = lambda y: fundamental_solution(np.broadcast_to(x, y.shape), y, ctx)
        return f, eps ** (n - 1) / ((n - 2) * rho ** (n - 2)), "equality"
    if name in ("ap6", "ap7"):
        if n != 2:
            raise InvalidInputError(f"{name} is a planar identity")
        if name == "ap6":
            return (lambda y: np.log(np.linalg.norm(x - y, axis=-1))), 2 * math.pi * eps * math.log(rho), "equality"
        return (lambda y: np.abs(np.log(np.linalg.norm(x - y, axis=-1)))), eps * abs(math.log(rho)), "bound"
    raise InvalidInputError(f"unknown identity {name!r}")


IDENTITIES = {
    2: ("ap1", "ap2", "ap10", "lap1", "lap2", "ap6", "ap7", "aar", "grad_rep"),
    3: ("ap1", "ap2", "ap10", "lap1", "lap2", "ap5", "aar", "grad_rep"),
}


def check_identity(name: str, x, eps: float, dim: int) -> IdentityCheck:
    """Evaluate the named identity at ``x`` for the sphere ``|y| = eps``.

    Examples
    --------
    >>> c = check_identity("ap6", (2.0, 0.0), 0.1, 2)
    >>> round(float(c.lhs_quadrature), 6)
    0.435517
    """
    ctx = KernelContext.for_dim(dim)
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise InvalidInputError(f"x must have shape ({dim},)")
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps!r}")
    f, rhs, kind = _identity(name, x, eps, ctx)
    lhs, scale, nodes = integrate_converged(f, eps, dim)
    rhs = np.asarray(rhs, dtype=float)
    abs_err = float(np.max(np.abs(lhs - rhs)))
    if kind == "bound":
        ratio = float(lhs / rhs) if rhs > 0 else math.inf
        return IdentityCheck(name, dim, tuple(x), eps, float(lhs), float(rhs), abs_err, math.nan,
                             nodes, kind, ratio)
    rel = abs_err / max(float(np.max(np.abs(rhs))), scale)
    lhs_out = float(lhs) if np.ndim(lhs) == 0 else lhs
    rhs_out = float(rhs) if rhs.ndim == 0 else rhs
    return IdentityCheck(name, dim, tuple(x), eps, lhs_out, rhs_out, abs_err, rel, nodes)


def sample_points(name: str, dim: int, n: int, seed: int = DEFAULT_SEED):
    """Random admissible ``(x, eps)`` pairs for an identity.

    ``eps`` is log-uniform in ``[1e-3, 0.5]``.  Exterior identities take
    ``|x| / eps`` log-uniform in ``[1.2, 20]``; ``aar`` takes
    ``|x| / eps`` uniform in ``[0, 0.8]``.  For ``ap7`` the point keeps a
    distance ``eps`` from the unit circle, where ``ln|x|`` vanishes and the
    bound cannot hold.
    """
    rng = np.random.default_rng([seed, dim, sum(map(ord, name))])
    out = []
    while len(out) < n:
        eps = float(np.exp(rng.uniform(math.log(1e-3), math.log(0.5))))
        d = rng.normal(size=dim)
        d /= np.linalg.norm(d)
        if name == "aar":
            t = rng.uniform(0, 0.8)
        else:
            t = float(np.exp(rng.uniform(math.log(1.2), math.log(20))))
        x = t * eps * d
        if name == "ap7" and abs(np.linalg.norm(x) - 1) <= eps:
            continue
        out.append((x, eps))
    return out


def run_suite(dims=(2, 3), n_samples: int = 20, seed: int = DEFAULT_SEED, names=None):
    """Every identity at ``n_samples`` random admissible points per dimension."""
    checks = []
    for dim in dims:
        for name in names or IDENTITIES[dim]:
            if name not in IDENTITIES[dim]:
                continue
            for x, eps in sample_points(name, dim, n_samples, seed):
                checks.append(check_identity(name, x, eps, dim))
    return checks
