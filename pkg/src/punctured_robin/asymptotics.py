"""Small-hole asymptotics of the Robin function and its critical points.

Expansions return the exact leading terms only; the size of what was
dropped is described separately by :func:`remainder_budget`, because no
explicit remainder constants are available.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .domains import PuncturedDomain
from .errors import GeometryError, InvalidInputError, NonConvergenceError, UnsupportedCaseError
from .exact_kernels import KernelContext, robin_exterior_ball

__all__ = [
    "GradientCaseInput",
    "DegenerateCaseInput",
    "PredictedCriticalPoint",
    "RemainderBudget",
    "RegionWarning",
    "solve_r_eps",
    "solve_r_hat_eps",
    "predict_gradient_case",
    "predict_degenerate_case",
    "symmetric_axis_prediction",
    "predict_count",
    "expansion_robin",
    "expansion_robin_schiffer",
    "expansion_grad",
    "expansion_hessian",
    "remainder_budget",
    "limit_F",
    "limit_F_hat",
    "f_critical_point",
    "f_critical_hessian_det",
    "f_hat_critical_points",
]

EIGEN_RTOL = 1e-9


class RegionWarning(UserWarning):
    """An expansion was evaluated outside the region where it is justified."""


@dataclass(frozen=True)
class GradientCaseInput:
    """Hole centre ``P`` with ``grad R_Omega(P) != 0``."""

    eps: float
    grad_R_at_P: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grad_R_at_P, dtype=float)
        p = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "grad_R_at_P", g)
        object.__setattr__(self, "P", p)
        if g.shape != p.shape or g.ndim != 1 or len(g) < 2:
            raise InvalidInputError("grad_R_at_P and P must be vectors of the same dimension >= 2")
        if not np.linalg.norm(g) > 0:
            raise InvalidInputError("the gradient at P must be nonzero")
        _check_eps(self.eps)

    @property
    def dim(self) -> int:
        return len(self.P)


@dataclass(frozen=True)
class DegenerateCaseInput:
    """Hole centre ``P`` at a non-degenerate critical point of ``R_Omega``."""

    eps: float
    hessian_R_at_P: np.ndarray
    P: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.hessian_R_at_P, dtype=float)
        p = np.asarray(self.P, dtype=float)
        if h.shape != (len(p), len(p)) or len(p) < 2:
            raise InvalidInputError("hessian must be an N x N matrix matching P")
        if not np.allclose(h, h.T, rtol=1e-10, atol=1e-14 * np.abs(h).max()):
            raise InvalidInputError("hessian must be symmetric")
        h = 0.5 * (h + h.T)
        lam, vec = np.linalg.eigh(h)
        if np.min(np.abs(lam)) <= EIGEN_RTOL * np.max(np.abs(lam)):
            raise InvalidInputError("hessian is singular; the degenerate case needs det != 0")
        _check_eps(self.eps)
        object.__setattr__(self, "hessian_R_at_P", h)
        object.__setattr__(self, "P", p)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def dim(self) -> int:
        return len(self.P)


@dataclass(frozen=True)
class PredictedCriticalPoint:
    """A predicted critical point of the punctured-domain Robin function.

    ``source`` is ``"gradient_case"`` or ``"eigenvalue l+"``/``"eigenvalue
    l-"`` (``l`` counted from 1 in ascending eigenvalue order).
    ``axis_curvature`` is the predicted second derivative along the
    coordinate axis, when known.
    """

    location: np.ndarray
    expected_index: int
    source: str
    leading_scale: float
    center: np.ndarray
    axis_curvature: float | None = None


@dataclass(frozen=True)
class RemainderBudget:
    """Order of the neglected terms and its magnitude without the constant."""

    expression: str
    magnitude: float


def _check_eps(eps):
    if not 0 < eps < 1:
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps!r}")


def _bisect_root(g, lo, hi):
    if not (lo < hi and g(lo) < 0 < g(hi)):
        # The documented bracket needs |ln eps| large enough; otherwise use
        # the always-valid bracket (0, 1], on which g increases from -inf.
        lo, hi = np.nextafter(0.0, 1.0), 1.0
        if not g(lo) < 0 < g(hi):
            raise NonConvergenceError("radius equation has no sign change on its bracket")
    return bisect(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)


def solve_r_eps(eps: float) -> float:
    """Root of ``r - ln r / ln eps = 0`` on ``(0, inf)``.

    The function is increasing, so the root is unique; for small ``eps`` it
    lies in ``(1/|ln eps|, 1/sqrt|ln eps|)``.
    """
    _check_eps(eps)
    L = -math.log(eps)
    return _bisect_root(lambda r: r + math.log(r) / L, 1 / L, 1 / math.sqrt(L))


def solve_r_hat_eps(eps: float, lam: float) -> float:
    """Root of ``r^2 - ln r / (lam pi ln eps) = 0`` on ``(0, inf)``."""
    _check_eps(eps)
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam!r}")
    k = lam * math.pi * -math.log(eps)
    return _bisect_root(lambda r: r * r + math.log(r) / k, k**-0.5, k**-0.25)


def predict_gradient_case(inp: GradientCaseInput, ctx: KernelContext | None = None,
                          planar_coefficient: str = "pi") -> PredictedCriticalPoint:
    """Location of the critical point created next to the hole.

    For ``N >= 3`` it is ``P + eps^((N-2)/(2N-3)) y0``, ``y0`` being the
    critical point of the limit function ``F``.  For ``N = 2`` it is
    ``P + r_eps grad R / (pi |grad R|^2)``; ``planar_coefficient="pi_squared"``
    selects the alternative normalisation ``grad R / (pi^2 |grad R|^2)``.
    """
    n = inp.dim
    ctx = ctx or KernelContext.for_dim(n)
    g = inp.grad_R_at_P
    gn = float(np.linalg.norm(g))
    if n == 2:
        scale = solve_r_eps(inp.eps)
        if planar_coefficient == "pi":
            y = g / (math.pi * gn**2)
        elif planar_coefficient == "pi_squared":
            y = g / (math.pi**2 * gn**2)
        else:
            raise InvalidInputError(f"unknown planar_coefficient {planar_coefficient!r}")
    else:
        scale = inp.eps ** ((n - 2) / (2 * n - 3))
        y = f_critical_point(g, ctx)
    return PredictedCriticalPoint(inp.P + scale * y, (-1) ** (n + 1), "gradient_case", scale, inp.P)


def _positive_simple(lam, allow_multiple=False):
    idx = [i for i in range(len(lam)) if lam[i] > 0]
    if not allow_multiple:
        for a in idx:
            for b in range(len(lam)):
                if a != b and abs(lam[a] - lam[b]) <= EIGEN_RTOL * max(abs(lam[a]), abs(lam[b])):
                    raise UnsupportedCaseError(
                        f"positive eigenvalue {lam[a]!r} is not simple; this case is not covered")
    return idx


def _index_sign(lam, l):
    prod = lam[l] * np.prod([lam[s] - lam[l] for s in range(len(lam)) if s != l])
    return int(np.sign(prod))


def predict_degenerate_case(inp: DegenerateCaseInput, ctx: KernelContext | None = None):
    """Two predicted points per simple positive eigenvalue ``lam_l``.

    They are ``P +- (D_N/lam_l)^(1/(2N-2)) eps^((N-2)/(2N-2)) v_l`` for
    ``N >= 3`` and ``P +- rhat(eps, lam_l) v_l`` for ``N = 2``.

    The amplitude exponent ``1/(2N-2)`` is the one that balances the two
    terms of the rescaled limit function.  A variant with ``1/(N-2)`` on
    ``D_N / lam_l`` also circulates; it does not make the limit function
    stationary and is not used here.
    """
    n = inp.dim
    ctx = ctx or KernelContext.for_dim(n)
    lam, vec = inp.eigenvalues, inp.eigenvectors
    out = []
    for l in _positive_simple(lam):
        scale = _degenerate_radius(lam[l], inp.eps, ctx)
        index = _index_sign(lam, l)
        for sign, tag in ((1, "+"), (-1, "-")):
            out.append(PredictedCriticalPoint(
                inp.P + sign * scale * vec[:, l], index, f"eigenvalue {l + 1}{tag}", scale, inp.P))
    return out


def _degenerate_radius(lam, eps, ctx):
    n = ctx.dim
    if n == 2:
        return solve_r_hat_eps(eps, lam)
    return (ctx.d_n / lam) ** (1 / (2 * n - 2)) * eps ** ((n - 2) / (2 * n - 2))


def symmetric_axis_prediction(hess_R_diag, eps: float, ctx: KernelContext, P=None):
    """Axis critical points for a convex domain symmetric in every coordinate.

    Equal eigenvalues are allowed.  Each point carries the predicted
    on-axis second derivative ``(2N - 2) lam_i`` in ``axis_curvature``;
    ``expected_index`` is 0 when the eigenvalue is repeated.
    """
    lam = np.asarray(hess_R_diag, dtype=float)
    n = ctx.dim
    if lam.shape != (n,) or not np.all(lam > 0):
        raise InvalidInputError("expected N positive diagonal Hessian entries")
    _check_eps(eps)
    P = np.zeros(n) if P is None else np.asarray(P, dtype=float)
    out = []
    for i in range(n):
        scale = _degenerate_radius(lam[i], eps, ctx)
        index = _index_sign(lam, i)
        for sign, tag in ((1, "+"), (-1, "-")):
            out.append(PredictedCriticalPoint(
                P + sign * scale * np.eye(n)[i], index, f"eigenvalue {i + 1}{tag}", scale, P,
                axis_curvature=(2 * n - 2) * lam[i]))
    return out


def predict_count(outer_critical_points: int, grad_at_P_nonzero: bool,
                  positive_simple_eigs: int = 0, radially_symmetric: bool = False):
    """Predicted number of critical points of the punctured-domain Robin function.

    Returns ``math.inf`` for a ball punctured at its centre, where the
    critical set is a sphere.
    """
    if radially_symmetric:
        return math.inf
    if grad_at_P_nonzero:
        return outer_critical_points + 1
    return outer_critical_points + 2 * positive_simple_eigs - 1


def _offset(x, pd: PuncturedDomain):
    x = np.asarray(x, dtype=float)
    z = x - pd.center
    if np.linalg.norm(z) <= pd.hole_radius:
        raise GeometryError("x lies in the closed hole")
    return x, z


def expansion_robin(x, pd: PuncturedDomain, outer_robin: Callable) -> float:
    """Leading terms of the Robin function of the punctured domain.

    ``R_Omega(x) + R_ext(x - P)`` for ``N >= 3``; for ``N = 2`` the two
    logarithms combine into ``R_Omega(x) + (1/2pi) ln(|z|^2/(|z|^2 - eps^2))``.
    """
    x, z = _offset(x, pd)
    eps = pd.hole_radius
    if pd.dim == 2:
        rho = np.linalg.norm(z)
        return float(outer_robin(x)) + (2 * math.log(rho) - math.log((rho - eps) * (rho + eps))) / (2 * math.pi)
    ctx = KernelContext.for_dim(pd.dim)
    return float(outer_robin(x)) + float(robin_exterior_ball(z, eps, ctx))


def expansion_robin_schiffer(x, pd: PuncturedDomain, outer_robin: Callable,
                             outer_green: Callable) -> float:
    """Capacity-type expansion ``R_Omega(x) + G(x, P)^2 / (C_N eps^(2-N) - R_Omega(P))``.

    The normalisation is the one that reproduces the exterior-ball Robin
    function exactly when the outer boundary recedes to infinity.
    """
    n = pd.dim
    if n < 3:
        raise UnsupportedCaseError("the capacity expansion is stated for N >= 3 only")
    x, _ = _offset(x, pd)
    ctx = KernelContext.for_dim(n)
    P = pd.center
    g = float(outer_green(x, P))
    return float(outer_robin(x)) + g * g / (ctx.c_n * pd.hole_radius ** (2 - n) - float(outer_robin(P)))


def _planar_weight(z, eps):
    rho = np.linalg.norm(z)
    return (1 - math.log(rho) / math.log(eps)) / math.pi


def expansion_grad(x, pd: PuncturedDomain, outer_grad: Callable) -> np.ndarray:
    """Leading terms of the gradient of the punctured-domain Robin function."""
    x, z = _offset(x, pd)
    ctx = KernelContext.for_dim(pd.dim)
    out = np.asarray(outer_grad(x), dtype=float) + robin_exterior_ball(z, pd.hole_radius, ctx, order=1)
    if pd.dim == 2:
        out = out + _planar_weight(z, pd.hole_radius) * z / np.dot(z, z)
    return out


def expansion_hessian(x, pd: PuncturedDomain, outer_hess: Callable,
                      c: float = 0.1, q: float | None = None) -> np.ndarray:
    """Leading terms of the Hessian of the punctured-domain Robin function.

    Warns with :class:`RegionWarning` when ``|x - P| < c eps^q``; ``q``
    defaults to ``(N-2)/(2N-3)`` for ``N >= 3`` and 0.9 for ``N = 2``.
    """
    x, z = _offset(x, pd)
    n, eps = pd.dim, pd.hole_radius
    if q is None:
        q = (n - 2) / (2 * n - 3) if n > 2 else 0.9
    rho = float(np.linalg.norm(z))
    if rho < c * eps**q:
        warnings.warn(f"|x - P| = {rho:.3e} is below {c} * eps^{q:.3f}; Hessian expansion not justified",
                      RegionWarning, stacklevel=2)
    ctx = KernelContext.for_dim(n)
    out = np.asarray(outer_hess(x), dtype=float) + robin_exterior_ball(z, eps, ctx, order=2)
    if n == 2:
        d = (np.eye(2) * rho**2 - 2 * np.outer(z, z)) / rho**4
        out = out + _planar_weight(z, eps) * d
    return out


def remainder_budget(kind: str, x, pd: PuncturedDomain) -> RemainderBudget:
    """Size of the terms dropped by an expansion, up to an unknown constant.

    ``kind`` is ``"robin"``, ``"grad"`` or ``"schiffer"``.
    """
    _, z = _offset(x, pd)
    n, eps = pd.dim, pd.hole_radius
    rho = float(np.linalg.norm(z))
    if kind == "robin":
        if n == 2:
            return RemainderBudget("|ln|x-P|| / |ln eps|", abs(math.log(rho) / math.log(eps)))
        return RemainderBudget("eps^(N-2)/|x-P|^(N-2) + eps", (eps / rho) ** (n - 2) + eps)
    if kind == "grad":
        if n == 2:
            return RemainderBudget("1 / (|x-P| |ln eps|)", 1 / (rho * abs(math.log(eps))))
        return RemainderBudget("eps^(N-2)/|x-P|^(N-1) + eps", eps ** (n - 2) / rho ** (n - 1) + eps)
    if kind == "schiffer":
        if n == 2:
            raise UnsupportedCaseError("the capacity expansion is stated for N >= 3 only")
        return RemainderBudget("eps^(N-1)", eps ** (n - 1))
    raise InvalidInputError(f"unknown expansion kind {kind!r}")


def _singular_part(y, ctx, order):
    # -D_N / ((4 - 2N) |y|^(2N-4)), or -(1/pi) ln|y| when N = 2.
    n, d = ctx.dim, ctx.d_n
    r2 = float(np.dot(y, y))
    if r2 == 0:
        raise InvalidInputError("limit functions are singular at y = 0")
    if order == 0:
        if n == 2:
            return -d * 0.5 * math.log(r2)
        return -d / ((4 - 2 * n) * r2 ** (n - 2))
    if order == 1:
        return -d * y / r2 ** (n - 1)
    return -d * (np.eye(n) - (2 * n - 2) * np.outer(y, y) / r2) / r2 ** (n - 1)


def limit_F(y, grad_R, ctx: KernelContext, order: int = 0):
    """``F(y) = grad_R . y - D_N/((4-2N)|y|^(2N-4))`` (``- (1/pi) ln|y|`` if ``N = 2``).

    ``order`` 0, 1, 2 returns the value, gradient or Hessian.
    """
    y = np.asarray(y, dtype=float)
    g = np.asarray(grad_R, dtype=float)
    if order == 0:
        return float(g @ y) + _singular_part(y, ctx, 0)
    if order == 1:
        return g + _singular_part(y, ctx, 1)
    if order == 2:
        return _singular_part(y, ctx, 2)
    raise InvalidInputError(f"order must be 0, 1 or 2, got {order!r}")


def limit_F_hat(y, hess_R, ctx: KernelContext, order: int = 0):
    """``F^(y) = y.H y / 2 - D_N/((4-2N)|y|^(2N-4))`` (``- D_2 ln|y|`` if ``N = 2``)."""
    y = np.asarray(y, dtype=float)
    h = np.asarray(hess_R, dtype=float)
    if order == 0:
        return 0.5 * float(y @ h @ y) + _singular_part(y, ctx, 0)
    if order == 1:
        return h @ y + _singular_part(y, ctx, 1)
    if order == 2:
        return h + _singular_part(y, ctx, 2)
    raise InvalidInputError(f"order must be 0, 1 or 2, got {order!r}")


def f_critical_point(grad_R, ctx: KernelContext) -> np.ndarray:
    """The unique critical point ``y0 = (D_N/|g|)^(1/(2N-3)) g/|g|`` of ``F``."""
    g = np.asarray(grad_R, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0:
        raise InvalidInputError("F has no critical point when grad_R = 0")
    n = ctx.dim
    return (ctx.d_n / gn) ** (1 / (2 * n - 3)) * g / gn


def f_critical_hessian_det(grad_R, ctx: KernelContext) -> float:
    """Closed-form ``det Hess F(y0)``."""
    n = ctx.dim
    gn = float(np.linalg.norm(grad_R))
    return (-1) ** n * gn ** (n * (2 * n - 2) / (2 * n - 3)) / ctx.d_n ** (n / (2 * n - 3)) * (3 - 2 * n)


def f_hat_critical_points(hess_R, ctx: KernelContext):
    """Critical points ``+-(D_N/lam_l)^(1/(2N-2)) v_l`` of ``F^`` with their
    Hessian determinants ``(2N-2) lam_l prod_{s != l}(lam_s - lam_l)``.

    Returns a list of ``(point, det)`` pairs, two per positive eigenvalue.
    """
    h = np.asarray(hess_R, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (h + h.T))
    n = ctx.dim
    out = []
    for l in _positive_simple(lam):
        y = (ctx.d_n / lam[l]) ** (1 / (2 * n - 2)) * vec[:, l]
        det = (2 * n - 2) * lam[l] * float(np.prod([lam[s] - lam[l] for s in range(n) if s != l]))
        out.extend([(y, det), (-y, det)])
    return out
