"""Robin Hessian at the centre of slightly perturbed balls.

For ``Omega_delta = {sum_i x_i^2 (1 + alpha_i delta)^2 < 1}`` the Robin
function has a single critical point at the origin, and its Hessian there
is diagonal by the coordinate reflections.  Its eigenvalues start at
``D_N = 2 / (N omega_N)`` and move linearly in ``delta``.

Two first-order formulas are provided.  :func:`predicted_eigenvalues` is
the published slope, which only depends on ``alpha_i``.
:func:`first_order_eigenvalues` is the slope obtained from the
Hadamard variation of the ball Green function and depends on ``alpha_i``
and on ``sum(alpha)``; the two agree when ``sum(alpha) = N (N - 1) / 2``.
The numeric study reports residuals against both.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domains import PerturbedEllipsoid
from .errors import InvalidInputError, RobinError
from .exact_kernels import KernelContext
from .harmonic import Resolution, mfs_system, robin_hessian

__all__ = [
    "EllipsoidStudy",
    "predicted_eigenvalues",
    "first_order_eigenvalues",
    "numeric_hessian_eigenvalues",
    "run_study",
    "DEFAULT_DELTAS",
]

DEFAULT_DELTAS = (0.02, 0.04, 0.08)


def _check(dim, alpha, delta):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (dim,):
        raise InvalidInputError(f"alpha needs {dim} entries, got shape {alpha.shape}")
    if not np.all(alpha > 0) or np.any(np.diff(alpha) < 0):
        raise InvalidInputError("alpha must be positive and ascending")
    if not delta >= 0:
        raise InvalidInputError(f"delta must be non-negative, got {delta!r}")
    return alpha


def predicted_eigenvalues(dim: int, alpha, delta: float) -> np.ndarray:
    """Published linear prediction ``D_N + s_i delta`` with the remainder dropped.

    ``s_i = ((N-1)(N^2-2N-4) + 8(N+1) alpha_i) / (N (N+2) omega_N)``.

    Examples
    --------
    >>> predicted_eigenvalues(2, (1.0, 1.0), 0.1) * np.pi
    array([1.25, 1.25])
    """
    alpha = _check(dim, alpha, delta)
    ctx = KernelContext.for_dim(dim)
    n = dim
    slope = ((n - 1) * (n * n - 2 * n - 4) + 8 * (n + 1) * alpha) / (n * (n + 2) * ctx.omega_n)
    return ctx.d_n + slope * delta


def first_order_eigenvalues(dim: int, alpha, delta: float) -> np.ndarray:
    """Linear prediction from the Hadamard variation of the ball.

    ``lambda_i = D_N (1 + delta (4(N+1)/(N+2) alpha_i
    + (N^2-2N-4)/(N(N+2)) sum_j alpha_j))``.
    """
    alpha = _check(dim, alpha, delta)
    ctx = KernelContext.for_dim(dim)
    n = dim
    slope = 4 * (n + 1) / (n + 2) * alpha + (n * n - 2 * n - 4) / (n * (n + 2)) * alpha.sum()
    return ctx.d_n * (1 + slope * delta)


def _domain(dim, alpha, delta):
    alpha = _check(dim, alpha, delta)
    if delta * alpha[-1] >= 0.5:
        raise InvalidInputError("delta * max(alpha) must stay below 0.5")
    return PerturbedEllipsoid(tuple(alpha), float(delta))


def numeric_hessian_eigenvalues(dim: int, alpha, delta: float, resolution: Resolution | None = None,
                                return_diagnostics: bool = False):
    """Ascending eigenvalues of the numeric Robin Hessian at the origin.

    With ``return_diagnostics`` also returns ``{"off_diagonal": ...,
    "grad_norm": ...}``: the largest off-diagonal Hessian entry and
    ``|grad R(0)|``, both zero in exact arithmetic by symmetry.
    """
    domain = _domain(dim, alpha, delta)
    res = resolution or Resolution.for_dim(dim)
    origin = np.zeros(dim)
    H = robin_hessian(domain, origin, res)
    lam = np.linalg.eigvalsh(H)
    if not return_diagnostics:
        return lam
    off = float(np.max(np.abs(H - np.diag(np.diag(H)))))
    grad = mfs_system(domain, res).robin_gradient(origin[None])[0]
    return lam, {"off_diagonal": off, "grad_norm": float(np.linalg.norm(grad))}


@dataclass
class EllipsoidStudy:
    """Numeric versus predicted Hessian eigenvalues over a grid of ``delta``.

    ``residuals[k]`` is ``|numeric[k] - predicted[k]|`` per eigenvalue and
    ``ratios[k]`` is that divided by ``delta`` (``nan`` at ``delta = 0``).
    ``first_order`` and ``first_order_residuals`` carry the same for
    :func:`first_order_eigenvalues`.  Failed solves leave ``nan`` rows and a
    message in ``failures``.
    """

    dim: int
    alpha: tuple
    delta_grid: tuple
    predicted: list = field(default_factory=list)
    numeric: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    first_order: list = field(default_factory=list)
    first_order_residuals: list = field(default_factory=list)
    off_diagonal: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def ratios_decreasing(self) -> bool:
        """Whether every eigenvalue's residual ratio strictly decreases in ``delta``."""
        r = np.array([row for d, row in zip(self.delta_grid, self.ratios) if d > 0])
        return bool(len(r) > 1 and np.all(np.diff(r, axis=0) < 0))


def run_study(dim: int = 2, alpha=(1.0, 2.0), delta_grid=DEFAULT_DELTAS,
              resolution: Resolution | None = None, workers: int = 1) -> EllipsoidStudy:
    """Compare numeric and predicted eigenvalues for every ``delta`` in the grid."""
    grid = tuple(sorted(float(d) for d in delta_grid))
    alpha = tuple(float(a) for a in _check(dim, alpha, 0.0))
    for d in grid:
        _domain(dim, alpha, d)
    study = EllipsoidStudy(dim, alpha, grid)

    def solve(d):
        try:
            return numeric_hessian_eigenvalues(dim, alpha, d, resolution, return_diagnostics=True)
        except RobinError as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(solve, grid))
    else:
        results = [solve(d) for d in grid]

    nan = np.full(dim, np.nan)
    for d, out in zip(grid, results):
        pred = predicted_eigenvalues(dim, alpha, d)
        first = first_order_eigenvalues(dim, alpha, d)
        if isinstance(out, Exception):
            study.failures[d] = str(out)
            lam, diag = nan, {"off_diagonal": np.nan, "grad_norm": np.nan}
        else:
            lam, diag = out
        res = np.abs(lam - pred)
        study.predicted.append(pred)
        study.numeric.append(lam)
        study.residuals.append(res)
        study.ratios.append(res / d if d > 0 else nan)
        study.first_order.append(first)
        study.first_order_residuals.append(np.abs(lam - first))
        study.off_diagonal.append(diag["off_diagonal"])
        study.grad_norm.append(diag["grad_norm"])
    return study
