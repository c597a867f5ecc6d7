"""Locating and classifying critical points of a Robin function.

Evaluators expose batched methods ``gradients(X)``, ``values(X)`` and
``inside(X)`` on arrays of shape (S, N), plus ``dim`` and ``bounds`` (an
axis-aligned box around the domain).  :class:`RobinEvaluator` wraps the
collocation solver; :class:`FunctionEvaluator` wraps plain callables.

All seeds are refined together by a damped Newton iteration on the
gradient, so each iteration costs a handful of batched gradient calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.cluster.hierarchy import fclusterdata
from scipy.optimize import brentq
from scipy.stats import qmc

from .domains import PuncturedDomain, unit_directions
from .errors import InvalidInputError, NonConvergenceError
from .harmonic import EPS_MACH, RobinEvaluator

__all__ = [
    "CriticalPoint",
    "FullDomain",
    "AnnulusAroundHole",
    "BallAround",
    "MultistartConfig",
    "RobinEvaluator",
    "FunctionEvaluator",
    "find_critical_points",
    "newton_refine",
    "classify",
    "detect_degenerate_ring",
    "compare_to_prediction",
    "MatchReport",
]

class FunctionEvaluator:
    """Adapter turning point-wise callables into a batched evaluator."""

    def __init__(self, gradient: Callable, value: Callable | None = None,
                 inside: Callable | None = None, bounds=None, dim: int | None = None):
        if bounds is None:
            raise InvalidInputError("FunctionEvaluator needs a bounding box")
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        self.bounds = (lo, hi)
        self.dim = dim or len(lo)
        self.diameter = float(np.linalg.norm(hi - lo))
        self._gradient = gradient
        self._value = value
        self._inside = inside

    def inside(self, X):
        X = np.atleast_2d(X)
        box = np.all((X > self.bounds[0]) & (X < self.bounds[1]), axis=1)
        if self._inside is None:
            return box
        return box & np.array([bool(self._inside(x)) for x in X], dtype=bool)

    def gradients(self, X):
        return np.array([self._gradient(x) for x in np.atleast_2d(X)], dtype=float).reshape(-1, self.dim)

    def values(self, X):
        if self._value is None:
            return np.full(len(np.atleast_2d(X)), np.nan)
        return np.array([self._value(x) for x in np.atleast_2d(X)], dtype=float)

    def value(self, x) -> float:
        return float(self.values(x)[0])

    def gradient(self, x):
        return self.gradients(x)[0]


@dataclass(frozen=True)
class FullDomain:
    """Search the whole (stand-off reduced) domain."""

    def contains(self, X, evaluator):
        return np.ones(len(X), dtype=bool)

    def box(self, evaluator):
        return evaluator.bounds


@dataclass(frozen=True)
class AnnulusAroundHole:
    """Points with ``inner < |x - center| < outer``; ``center`` defaults to the hole centre."""

    inner: float
    outer: float
    center: tuple | None = None

    def _center(self, evaluator):
        if self.center is not None:
            return np.asarray(self.center, dtype=float)
        domain = getattr(evaluator, "domain", None)
        if isinstance(domain, PuncturedDomain):
            return domain.center
        raise InvalidInputError("AnnulusAroundHole needs a centre when the domain has no hole")

    def contains(self, X, evaluator):
        r = np.linalg.norm(X - self._center(evaluator), axis=1)
        return (r > self.inner) & (r < self.outer)

    def box(self, evaluator):
        c = self._center(evaluator)
        return c - self.outer, c + self.outer


@dataclass(frozen=True)
class BallAround:
    """Points with ``|x - center| < radius``."""

    center: tuple
    radius: float

    def contains(self, X, evaluator):
        return np.linalg.norm(X - np.asarray(self.center, dtype=float), axis=1) < self.radius

    def box(self, evaluator):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class MultistartConfig:
    """Seeding and tolerance parameters of :func:`find_critical_points`.

    ``None`` entries take dimension-dependent defaults: 200 (N = 2) or
    1000 (N = 3) quasi-random seeds, gradient tolerance 1e-8 or 1e-6, and
    a deduplication radius of ``1e-5`` times the domain diameter.
    """

    seeds: tuple = ()
    n_grid: int | None = None
    rng_seed: int = 0
    grad_tol: float | None = None
    step_tol: float = 1e-9
    max_iter: int = 60
    dedup_radius: float | None = None
    degeneracy_tol: float = 1e-4

    def resolved(self, dim: int, diameter: float) -> "MultistartConfig":
        return MultistartConfig(
            seeds=tuple(tuple(map(float, s)) for s in self.seeds),
            n_grid=self.n_grid if self.n_grid is not None else (200 if dim == 2 else 1000),
            rng_seed=self.rng_seed,
            grad_tol=self.grad_tol if self.grad_tol is not None else (1e-8 if dim == 2 else 1e-6),
            step_tol=self.step_tol, max_iter=self.max_iter,
            dedup_radius=self.dedup_radius if self.dedup_radius is not None else 1e-5 * diameter,
            degeneracy_tol=self.degeneracy_tol)


@dataclass
class CriticalPoint:
    """A converged and classified critical point."""

    location: np.ndarray
    robin_value: float
    grad_norm: float
    hessian: np.ndarray
    eigenvalues: np.ndarray
    morse_index: int
    degenerate: bool
    sign_index: int
    iterations: int = 0


def _fd_hessians(evaluator, X):
    # Central differences of the batched gradient; step eps^(1/4) max(1, |x|).
    n = X.shape[1]
    h = EPS_MACH**0.25 * np.maximum(1.0, np.linalg.norm(X, axis=1))
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        d = h[:, None] * e
        cols.append((evaluator.gradients(X + d) - evaluator.gradients(X - d)) / (2 * h[:, None]))
    jac = np.stack(cols, axis=2)
    return 0.5 * (jac + np.swapaxes(jac, 1, 2))


def classify(evaluator, x, degeneracy_tol: float = 1e-4, iterations: int = 0) -> CriticalPoint:
    """Evaluate and classify ``x`` by the eigenvalues of its FD Hessian."""
    x = np.asarray(x, dtype=float)
    hess = getattr(evaluator, "hessian", None)
    H = np.asarray(hess(x), dtype=float) if hess is not None else _fd_hessians(evaluator, x[None])[0]
    lam = np.linalg.eigvalsh(H)
    morse = int(np.count_nonzero(lam < 0))
    degenerate = bool(np.min(np.abs(lam)) <= degeneracy_tol * np.max(np.abs(lam)))
    return CriticalPoint(
        location=x, robin_value=float(evaluator.values(x[None])[0]),
        grad_norm=float(np.linalg.norm(evaluator.gradients(x[None])[0])),
        hessian=H, eigenvalues=lam, morse_index=morse, degenerate=degenerate,
        sign_index=(-1) ** morse, iterations=iterations)


def _newton_batch(evaluator, X0, grad_tol, step_tol, max_iter, region=None):
    """Damped Newton from every row of ``X0``; returns (X, status, iterations)."""
    X = np.array(X0, dtype=float, copy=True)
    S = len(X)
    status = np.array(["running"] * S, dtype=object)
    iters = np.zeros(S, dtype=int)

    def admissible(Y):
        ok = np.asarray(evaluator.inside(Y), dtype=bool)
        if region is not None and ok.any():
            ok = ok & region.contains(Y, evaluator)
        return ok

    start_ok = admissible(X)
    status[~start_ok] = "left-domain"
    G = np.zeros_like(X)
    if start_ok.any():
        G[start_ok] = evaluator.gradients(X[start_ok])
    F = np.sum(G * G, axis=1)

    for it in range(max_iter):
        act = np.flatnonzero(status == "running")
        if act.size == 0:
            break
        H = _fd_hessians(evaluator, X[act])
        steps = np.empty((act.size, X.shape[1]))
        for k, (h, g) in enumerate(zip(H, G[act])):
            try:
                steps[k] = -np.linalg.solve(h, g)
            except np.linalg.LinAlgError:
                steps[k] = -np.linalg.lstsq(h, g, rcond=None)[0]
        snorm = np.linalg.norm(steps, axis=1)
        done = (np.sqrt(F[act]) < grad_tol) & (snorm < step_tol * np.maximum(1.0, np.linalg.norm(X[act], axis=1)))
        status[act[done]] = "converged"
        iters[act[done]] = it
        keep = ~done
        act, steps = act[keep], steps[keep]
        t = np.ones(act.size)
        pending = np.ones(act.size, dtype=bool)
        ever_inside = np.zeros(act.size, dtype=bool)
        while pending.any():
            idx = np.flatnonzero(pending)
            trial = X[act[idx]] + t[idx, None] * steps[idx]
            ok = admissible(trial)
            ever_inside[idx[ok]] = True
            acc = np.zeros(idx.size, dtype=bool)
            if ok.any():
                Gt = evaluator.gradients(trial[ok])
                Ft = np.sum(Gt * Gt, axis=1)
                better = Ft < F[act[idx[ok]]]
                sel = np.flatnonzero(ok)[better]
                rows = act[idx[sel]]
                X[rows] = trial[sel]
                G[rows] = Gt[better]
                F[rows] = Ft[better]
                acc[sel] = True
            pending[idx[acc]] = False
            t[idx[~acc]] *= 0.5
            stalled = pending & (t < 1e-14)
            for k in np.flatnonzero(stalled):
                row = act[k]
                if np.sqrt(F[row]) < grad_tol:
                    status[row] = "converged"
                else:
                    status[row] = "stalled" if ever_inside[k] else "left-domain"
                iters[row] = it + 1
            pending &= ~stalled
    status[status == "running"] = "max-iterations"
    iters[status == "max-iterations"] = max_iter
    return X, status, iters


def newton_refine(evaluator, x0, grad_tol: float | None = None, step_tol: float = 1e-9,
                  max_iter: int = 60, degeneracy_tol: float = 1e-4) -> CriticalPoint:
    """Damped Newton iteration on the gradient from ``x0``.

    Each step solves with the central-difference Hessian and is halved
    until ``|grad R|^2`` decreases and the iterate stays admissible, down
    to a step factor of 1e-14.

    Raises
    ------
    NonConvergenceError
        With ``reason`` set to ``"max-iterations"``, ``"left-domain"`` or
        ``"stalled"``.
    """
    x0 = np.asarray(x0, dtype=float)
    if grad_tol is None:
        grad_tol = 1e-8 if len(x0) == 2 else 1e-6
    X, status, iters = _newton_batch(evaluator, x0[None], grad_tol, step_tol, max_iter)
    if status[0] != "converged":
        err = NonConvergenceError(f"Newton iteration failed: {status[0]}")
        err.reason = status[0]
        raise err
    return classify(evaluator, X[0], degeneracy_tol, int(iters[0]))


def _seed_points(evaluator, region, cfg):
    lo, hi = (np.asarray(b, dtype=float) for b in region.box(evaluator))
    sampler = qmc.Halton(d=evaluator.dim, scramble=True, seed=cfg.rng_seed)
    chosen = []
    drawn = 0
    while sum(len(c) for c in chosen) < cfg.n_grid and drawn < 50 * cfg.n_grid:
        batch = qmc.scale(sampler.random(cfg.n_grid), lo, hi)
        drawn += len(batch)
        ok = evaluator.inside(batch) & region.contains(batch, evaluator)
        chosen.append(batch[ok])
    grid = np.concatenate(chosen)[: cfg.n_grid] if chosen else np.zeros((0, evaluator.dim))
    extra = np.asarray(cfg.seeds, dtype=float).reshape(-1, evaluator.dim)
    return np.concatenate([extra, grid])


def _dedup(points: Sequence[CriticalPoint], radius: float):
    if len(points) <= 1:
        return list(points)
    locs = np.array([p.location for p in points])
    labels = fclusterdata(locs, t=radius, criterion="distance", method="single")
    best = {}
    for p, lab in zip(points, labels):
        key = (p.grad_norm, tuple(p.location))
        if lab not in best or key < best[lab][0]:
            best[lab] = (key, p)
    return sorted((v[1] for v in best.values()), key=lambda p: tuple(p.location))


def find_critical_points(evaluator, region=None, starts: MultistartConfig | None = None,
                         diagnostics: dict | None = None):
    """Multistart search for critical points inside ``region``.

    Seeds are the configured extra points (typically asymptotic
    predictions) followed by a scrambled Halton sample of the region.
    Converged points are classified, clustered with single linkage at the
    deduplication radius and returned sorted by location, so the output
    does not depend on seed order.  If ``diagnostics`` is a dict it
    receives the per-status counts of the Newton runs.
    """
    region = region or FullDomain()
    cfg = (starts or MultistartConfig()).resolved(evaluator.dim, evaluator.diameter)
    seeds = _seed_points(evaluator, region, cfg)
    X, status, iters = _newton_batch(evaluator, seeds, cfg.grad_tol, cfg.step_tol, cfg.max_iter, region)
    ok = status == "converged"
    found = [classify(evaluator, x, cfg.degeneracy_tol, int(i)) for x, i in zip(X[ok], iters[ok])]
    found = [p for p in found if p.grad_norm < cfg.grad_tol]
    if diagnostics is not None:
        labels, counts = np.unique(status.astype(str), return_counts=True)
        diagnostics.update(n_seeds=len(seeds), status=dict(zip(labels.tolist(), counts.tolist())))
    return _dedup(found, cfg.dedup_radius)


def detect_degenerate_ring(evaluator, center, radius_bracket, n_angles: int = 32,
                           n_radii: int = 48, tol: float = 1e-6):
    """Radius of a sphere of critical points about ``center``, or ``None``.

    Along ``n_angles`` rays the tangential part of the gradient must stay
    below ``tol * (1 + |grad|)`` at every sampled radius and the radial part
    must change sign; the sign-change radii, found by root bracketing on
    each ray, must agree.
    """
    c = np.asarray(center, dtype=float)
    r0, r1 = map(float, radius_bracket)
    if not 0 <= r0 < r1:
        raise InvalidInputError("radius bracket must satisfy 0 <= r0 < r1")
    dirs = unit_directions(evaluator.dim, n_angles)
    radii = np.linspace(r0, r1, n_radii + 2)[1:-1]
    pts = c + radii[None, :, None] * dirs[:, None, :]
    flat = pts.reshape(-1, evaluator.dim)
    if not np.all(evaluator.inside(flat)):
        raise InvalidInputError("radius bracket leaves the admissible region")
    G = evaluator.gradients(flat).reshape(n_angles, n_radii, evaluator.dim)
    radial = np.einsum("ark,ak->ar", G, dirs)
    tangential = G - radial[..., None] * dirs[:, None, :]
    tan_norm = np.linalg.norm(tangential, axis=-1)
    if np.any(tan_norm > tol * (1 + np.linalg.norm(G, axis=-1))):
        return None
    roots = []
    for a in range(n_angles):
        # A sample exactly on the root counts as positive; brentq accepts it as an endpoint.
        s = np.where(radial[a] >= 0, 1, -1)
        change = np.flatnonzero(s[:-1] * s[1:] < 0)
        if change.size != 1:
            return None
        k = change[0]
        u = dirs[a]
        f = lambda r: float(evaluator.gradients((c + r * u)[None])[0] @ u)
        roots.append(brentq(f, radii[k], radii[k + 1], xtol=1e-13))
    roots = np.array(roots)
    if np.ptp(roots) > 1e-6 * max(1.0, roots.mean()):
        return None
    return float(roots.mean())


@dataclass
class MatchReport:
    """Outcome of matching found points against predictions.

    Each pair records the found and predicted positions in their lists,
    the distance, that distance relative to ``|prediction - P|``, whether
    the indices agree and, when ``robin_at_P`` is given, the drift
    ``|R(found) - R_Omega(P)|``.
    """

    pairs: list = field(default_factory=list)
    unmatched_found: list = field(default_factory=list)
    unmatched_predicted: list = field(default_factory=list)

    @property
    def cardinality_mismatch(self) -> bool:
        return bool(self.unmatched_found or self.unmatched_predicted)


def compare_to_prediction(found: Sequence[CriticalPoint], predicted, robin_at_P: float | None = None) -> MatchReport:
    """Greedy nearest-pair matching of found and predicted critical points."""
    report = MatchReport()
    if found and predicted and len(found[0].location) != len(predicted[0].location):
        raise InvalidInputError("found and predicted points have different dimensions")
    cand = sorted(
        (float(np.linalg.norm(f.location - p.location)), i, j)
        for i, f in enumerate(found) for j, p in enumerate(predicted))
    used_f, used_p = set(), set()
    for d, i, j in cand:
        if i in used_f or j in used_p:
            continue
        used_f.add(i)
        used_p.add(j)
        p = predicted[j]
        scale = float(np.linalg.norm(p.location - p.center))
        pair = dict(found=i, predicted=j, distance=d,
                    relative_error=d / scale if scale > 0 else math.inf,
                    index_agrees=found[i].sign_index == p.expected_index)
        if robin_at_P is not None:
            pair["robin_drift"] = abs(found[i].robin_value - robin_at_P)
        report.pairs.append(pair)
    report.unmatched_found = [i for i in range(len(found)) if i not in used_f]
    report.unmatched_predicted = [j for j in range(len(predicted)) if j not in used_p]
    return report
