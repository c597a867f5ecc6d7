"""Regular part of the Dirichlet Green function by fundamental solutions.

For a fixed pole ``y`` the regular part ``H(., y)`` is harmonic in the
domain and equals ``S(., y)`` on the boundary.  It is approximated by

    H(x, y) ~ sum_j c_j(y) S(x, z_j)  (+ c_0 when N = 2)

with charges ``z_j`` on a dilated copy of the outer boundary and on a small
sphere inside the hole.  The collocation matrix depends only on the domain,
so its truncated singular value decomposition is computed once and
``c(y) = M S(xi, y)`` for every pole, ``M`` being the truncated
pseudo-inverse.  The Robin function is then the bilinear form
``R(x) = phi(x) . M b(x)``, whose gradient is available in closed form.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .domains import PuncturedDomain, _StarDomain, unit_directions
from .errors import GeometryError, InvalidInputError, NonConvergenceError, UnsupportedCaseError
from .exact_kernels import KernelContext

__all__ = [
    "Resolution",
    "HarmonicSolution",
    "MFSSystem",
    "RobinEvaluator",
    "mfs_system",
    "solve_regular_part",
    "robin",
    "robin_gradient",
    "robin_hessian",
]

EPS_MACH = np.finfo(float).eps


@dataclass(frozen=True)
class Resolution:
    """Discretisation parameters.

    ``n_outer`` and ``n_hole`` count charges; collocation uses
    ``oversampling`` times as many boundary nodes.  Outer charges sit on the
    boundary scaled by ``dilation`` about the origin, hole charges on the
    sphere of radius ``hole_charge_fraction * eps`` about the hole centre.
    Singular values below ``rcond * s_max`` are discarded.
    """

    n_outer: int = 256
    n_hole: int = 48
    oversampling: float = 2.0
    dilation: float = 1.25
    hole_charge_fraction: float = 0.5
    rcond: float = 1e-12
    residual_tol: float = 1e-8

    def __post_init__(self):
        if self.n_outer < 4 or self.n_hole < 4:
            raise InvalidInputError("need at least four charges per boundary component")
        if self.oversampling < 1:
            raise InvalidInputError("oversampling must be at least 1")
        if not self.dilation > 1:
            raise InvalidInputError("dilation must exceed 1")
        if not 0 < self.hole_charge_fraction < 1:
            raise InvalidInputError("hole_charge_fraction must lie in (0, 1)")

    @classmethod
    def for_dim(cls, dim: int, **overrides) -> "Resolution":
        """Defaults tuned per dimension."""
        if dim == 3:
            base = dict(n_outer=900, n_hole=300, dilation=1.8, residual_tol=1e-6)
        else:
            base = {}
        base.update(overrides)
        return cls(**base)

    def refined(self, factor: int = 2) -> "Resolution":
        return Resolution(
            n_outer=self.n_outer * factor, n_hole=self.n_hole * factor,
            oversampling=self.oversampling, dilation=self.dilation,
            hole_charge_fraction=self.hole_charge_fraction, rcond=self.rcond,
            residual_tol=self.residual_tol)


def _split(domain):
    if isinstance(domain, PuncturedDomain):
        return domain.outer, domain
    if isinstance(domain, _StarDomain):
        return domain, None
    raise InvalidInputError(f"unsupported domain {domain!r}")


def _kernel(x, z, dim):
    """``S(x_a, z_b)`` for all pairs; shapes (A, N), (B, N) -> (A, B)."""
    d = x[:, None, :] - z[None, :, :]
    r2 = np.einsum("abk,abk->ab", d, d)
    if dim == 2:
        return -np.log(r2) / (4 * np.pi)
    ctx = KernelContext.for_dim(dim)
    return ctx.c_n * r2 ** (-(dim - 2) / 2)


def _kernel_grad(x, z, dim):
    """Gradient in ``x`` of ``S(x_a, z_b)``; shape (A, B, N)."""
    d = x[:, None, :] - z[None, :, :]
    r2 = np.einsum("abk,abk->ab", d, d)
    area = dim * math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    return -d / (area * r2[..., None] ** (dim / 2))


class MFSSystem:
    """Charges, collocation nodes and truncated pseudo-inverse for a domain."""

    def __init__(self, domain, resolution: Resolution):
        outer, punctured = _split(domain)
        dim = outer.dim
        if dim not in (2, 3):
            raise UnsupportedCaseError("the collocation solver supports N = 2 and N = 3")
        self.domain = domain
        self.resolution = resolution
        self.dim = dim
        self.outer = outer
        self.punctured = punctured
        res = resolution
        n_col = int(math.ceil(res.oversampling * res.n_outer))
        charges = [outer.charge_points(res.n_outer, res.dilation)]
        colloc = [outer.boundary_points(n_col)]
        valid = [outer.boundary_points(n_col, 0.5)]
        if punctured is not None:
            p, eps = punctured.center, punctured.hole_radius
            m_col = int(math.ceil(res.oversampling * res.n_hole))
            charges.append(p + res.hole_charge_fraction * eps * unit_directions(dim, res.n_hole, 0.25))
            colloc.append(p + eps * unit_directions(dim, m_col))
            valid.append(p + eps * unit_directions(dim, m_col, 0.5))
        self.charges = np.concatenate(charges)
        self.collocation = np.concatenate(colloc)
        self.validation = np.concatenate(valid)
        self.has_constant = dim == 2

        a = self.basis(self.collocation)
        scale = np.linalg.norm(a, axis=0)
        u, s, vt = np.linalg.svd(a / scale, full_matrices=False)
        keep = s > res.rcond * s[0]
        self.rank = int(np.count_nonzero(keep))
        self.singular_values = s
        # Kept as factors: forming the pseudo-inverse explicitly loses
        # several digits to cancellation.
        self._u = u[:, keep]
        self._s = s[keep]
        self._vt = vt[keep] / scale

    @property
    def n_basis(self) -> int:
        return len(self.charges) + int(self.has_constant)

    def basis(self, x):
        """Basis functions at points ``x`` of shape (A, N); returns (A, n_basis)."""
        phi = _kernel(x, self.charges, self.dim)
        if self.has_constant:
            phi = np.concatenate([phi, np.ones((len(x), 1))], axis=1)
        return phi

    def basis_grad(self, x):
        """Gradients of the basis functions; returns (A, n_basis, N)."""
        g = _kernel_grad(x, self.charges, self.dim)
        if self.has_constant:
            g = np.concatenate([g, np.zeros((len(x), 1, self.dim))], axis=1)
        return g

    def coefficients(self, y):
        """Coefficients of ``H(., y_b)`` for poles ``y`` of shape (B, N); returns (n_basis, B)."""
        q = self._u.T @ _kernel(self.collocation, y, self.dim)
        return self._vt.T @ (q / self._s[:, None])

    def residual(self, y):
        """Largest boundary mismatch at the validation nodes, per pole.

        Measured relative to ``max(1, max |S|)`` over the nodes, since the
        boundary data grows like ``eps^(2-N)`` for poles near a small hole.
        """
        c = self.coefficients(y)
        data = _kernel(self.validation, y, self.dim)
        approx = self.basis(self.validation) @ c
        scale = np.maximum(1.0, np.max(np.abs(data), axis=0))
        return np.max(np.abs(approx - data), axis=0) / scale

    def robin(self, x):
        """Robin function at points ``x`` of shape (A, N)."""
        p = self.basis(x) @ self._vt.T
        q = _kernel(x, self.collocation, self.dim) @ self._u
        return np.sum(p * q / self._s, axis=1)

    def robin_gradient(self, x):
        """Exact gradient of the discrete Robin function; returns (A, N)."""
        p = self.basis(x) @ self._vt.T
        q = _kernel(x, self.collocation, self.dim) @ self._u
        # Contract the long axes with matmul (BLAS) before the cheap sums.
        dp = np.swapaxes(self.basis_grad(x), 1, 2) @ self._vt.T
        dq = np.swapaxes(_kernel_grad(x, self.collocation, self.dim), 1, 2) @ self._u
        w = 1 / self._s
        return np.einsum("akm,am->ak", dp, q * w) + np.einsum("akm,am->ak", dq, p * w)


@functools.lru_cache(maxsize=32)
def _cached_system(domain, resolution):
    return MFSSystem(domain, resolution)


def mfs_system(domain, resolution: Resolution | None = None) -> MFSSystem:
    """Build, or fetch from cache, the collocation system of ``domain``."""
    if resolution is None:
        resolution = Resolution.for_dim(domain.dim)
    return _cached_system(domain, resolution)


@dataclass
class HarmonicSolution:
    """Discrete regular part ``H(., y)`` for one pole ``y``."""

    singularity: np.ndarray
    charge_points: np.ndarray
    coefficients: np.ndarray
    boundary_residual: float
    system: MFSSystem = field(repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.system.dim)
        return (self.system.basis(flat) @ self.coefficients).reshape(x.shape[:-1])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.system.dim)
        g = np.einsum("ajk,j->ak", self.system.basis_grad(flat), self.coefficients)
        return g.reshape(x.shape)


def _check_inside(domain, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (domain.dim,):
        raise InvalidInputError(f"expected a point of dimension {domain.dim}, got shape {x.shape}")
    if not np.all(domain.contains(x)):
        raise GeometryError(f"point {x.tolist()} is not inside the domain")
    return x


def solve_regular_part(domain, y, resolution: Resolution | None = None) -> HarmonicSolution:
    """Regular part ``H(., y)`` of the Dirichlet Green function of ``domain``.

    Raises
    ------
    GeometryError
        If ``y`` is not strictly inside the domain.
    NonConvergenceError
        If the boundary mismatch at the validation nodes exceeds
        ``resolution.residual_tol``.
    """
    y = _check_inside(domain, y)
    system = mfs_system(domain, resolution)
    c = system.coefficients(y[None, :])[:, 0]
    res = float(system.residual(y[None, :])[0])
    if res > system.resolution.residual_tol:
        raise NonConvergenceError(
            f"boundary residual {res:.3e} exceeds tolerance {system.resolution.residual_tol:.1e}")
    return HarmonicSolution(y.copy(), system.charges, c, res, system)


def robin(domain, x, resolution: Resolution | None = None) -> float:
    """Robin function ``H(x, x)``; raises ``NonConvergenceError`` like
    :func:`solve_regular_part`."""
    x = _check_inside(domain, x)
    system = mfs_system(domain, resolution)
    res = float(system.residual(x[None, :])[0])
    if res > system.resolution.residual_tol:
        raise NonConvergenceError(
            f"boundary residual {res:.3e} exceeds tolerance {system.resolution.residual_tol:.1e}")
    return float(system.robin(x[None, :])[0])


def _boundary_nodes(system: MFSSystem, n: int):
    nodes, normals, weights = system.outer.boundary_quadrature(n)
    if system.punctured is not None:
        pd = system.punctured
        if system.dim == 2:
            u = unit_directions(2, n)
            w = np.full(n, 2 * np.pi * pd.hole_radius / n)
        else:
            from .domains import _sphere_product_rule
            u, w = _sphere_product_rule(n)
            w = w * pd.hole_radius**2
        nodes = np.concatenate([nodes, pd.center + pd.hole_radius * u])
        normals = np.concatenate([normals, -u])
        weights = np.concatenate([weights, w])
    return nodes, normals, weights


def _gradient_boundary_formula(system: MFSSystem, x, tol=1e-9, n0=64, n_max=8192):
    # grad R(x) = int nu(y) (dG(x, y)/dnu_y)^2 dsigma(y) over the whole boundary.
    c = system.coefficients(x[None, :])[:, 0]
    n = n0 if system.dim == 2 else n0 // 2
    previous = None
    while n <= n_max:
        nodes, normals, weights = _boundary_nodes(system, n)
        grad_s = _kernel_grad(nodes, x[None, :], system.dim)[:, 0, :]
        grad_h = np.einsum("ajk,j->ak", system.basis_grad(nodes), c)
        dn = np.sum((grad_s - grad_h) * normals, axis=-1)
        value = np.sum(normals * (weights * dn**2)[:, None], axis=0)
        if previous is not None and np.max(np.abs(value - previous)) < tol * max(1.0, np.max(np.abs(value))):
            return value
        previous = value
        n *= 2
    raise NonConvergenceError("boundary quadrature of the gradient formula did not settle")


def robin_gradient(domain, x, resolution: Resolution | None = None, method: str = "analytic"):
    """Gradient of the Robin function.

    ``method`` is one of

    ``"analytic"``
        exact derivative of the discrete bilinear form (default);
    ``"boundary_formula"``
        the boundary integral of ``nu (dG/dnu)^2`` with adaptive quadrature;
    ``"finite_difference"``
        central differences of :func:`robin` with step
        ``cbrt(eps_mach) * max(1, |x|)``.
    """
    x = _check_inside(domain, x)
    system = mfs_system(domain, resolution)
    if method == "analytic":
        return system.robin_gradient(x[None, :])[0]
    if method == "boundary_formula":
        return _gradient_boundary_formula(system, x)
    if method == "finite_difference":
        h = np.cbrt(EPS_MACH) * max(1.0, float(np.linalg.norm(x)))
        steps = h * np.eye(system.dim)
        return (system.robin(x + steps) - system.robin(x - steps)) / (2 * h)
    raise InvalidInputError(f"unknown gradient method {method!r}")


def fd_hessian(gradient, x):
    """Symmetrised central-difference Jacobian of ``gradient`` at ``x``.

    The step is ``eps_mach^(1/4) * max(1, |x|)``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = EPS_MACH**0.25 * max(1.0, float(np.linalg.norm(x)))
    cols = [(gradient(x + h * e) - gradient(x - h * e)) / (2 * h) for e in np.eye(n)]
    jac = np.stack(cols, axis=1)
    return 0.5 * (jac + jac.T)


def robin_hessian(domain, x, resolution: Resolution | None = None):
    """Hessian of the Robin function by differencing the analytic gradient."""
    x = _check_inside(domain, x)
    system = mfs_system(domain, resolution)
    return fd_hessian(lambda z: system.robin_gradient(z[None, :])[0], x)


class RobinEvaluator:
    """Robin function of one domain, with the stand-off used by searches.

    Points closer than ``outer_margin`` to the outer boundary, or than
    ``hole_margin`` to the hole boundary, count as outside: the discrete
    solution loses accuracy there and the Robin function blows up anyway.
    The defaults are one hole radius and two (N = 2) or six (N = 3) outer
    collocation spacings.

    ``inside``, ``values`` and ``gradients`` accept batches of shape
    (S, N); ``bounds`` is an axis-aligned box containing the domain.
    """

    _chunk = 256

    def __init__(self, domain, resolution: Resolution | None = None,
                 outer_margin: float | None = None, hole_margin: float | None = None):
        self.domain = domain
        self.system = mfs_system(domain, resolution)
        self.dim = domain.dim
        self.diameter = domain.diameter
        res = self.system.resolution
        if outer_margin is None:
            spacing = np.pi * domain.diameter / (res.oversampling * res.n_outer) if self.dim == 2 \
                else domain.diameter * np.sqrt(np.pi / (res.oversampling * res.n_outer))
            # Collocation error grows towards the boundary; slower in 3-D.
            outer_margin = (2 if self.dim == 2 else 6) * spacing
        if hole_margin is None:
            hole_margin = domain.hole_radius if isinstance(domain, PuncturedDomain) else 0.0
        self.outer_margin = float(outer_margin)
        self.hole_margin = float(hole_margin)
        half = 0.5 * self.diameter * np.ones(self.dim)
        self.bounds = (-half, half)

    def inside(self, x):
        """Membership with stand-off; a bool for one point, an array for a batch."""
        x = np.asarray(x, dtype=float)
        if isinstance(self.domain, PuncturedDomain):
            ok = self.domain.contains(x, self.outer_margin, self.hole_margin)
        else:
            ok = self.domain.contains(x, self.outer_margin)
        return bool(ok) if x.ndim == 1 else np.asarray(ok)

    def _batched(self, fn, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.concatenate([fn(X[i:i + self._chunk]) for i in range(0, len(X), self._chunk)]) \
            if len(X) else fn(X)

    def values(self, X) -> np.ndarray:
        return self._batched(self.system.robin, X)

    def gradients(self, X) -> np.ndarray:
        return self._batched(self.system.robin_gradient, X)

    def value(self, x) -> float:
        return float(self.values(x)[0])

    def gradient(self, x) -> np.ndarray:
        return self.gradients(x)[0]

    def hessian(self, x) -> np.ndarray:
        return fd_hessian(self.gradient, x)

    def residual(self, x) -> float:
        return float(self.system.residual(np.asarray(x, dtype=float)[None, :])[0])
