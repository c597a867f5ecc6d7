import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import annulus_ring_radius_2d
from punctured_robin.asymptotics import PredictedCriticalPoint
from punctured_robin.critical import (AnnulusAroundHole, BallAround, CriticalPoint, FunctionEvaluator,
                                      MultistartConfig, RobinEvaluator, _dedup, classify,
                                      compare_to_prediction, detect_degenerate_ring, find_critical_points,
                                      newton_refine)
from punctured_robin.domains import Ball, PuncturedDomain
from punctured_robin.errors import InvalidInputError, NonConvergenceError
from punctured_robin.harmonic import robin_gradient

BOX = (np.array([-2.0, -2.0]), np.array([2.0, 2.0]))


def double_well():
    # f = x^4 - 2x^2 + y^2: minima at (+-1, 0), saddle at the origin.
    return FunctionEvaluator(
        gradient=lambda p: np.array([4 * p[0] ** 3 - 4 * p[0], 2 * p[1]]),
        value=lambda p: p[0] ** 4 - 2 * p[0] ** 2 + p[1] ** 2, bounds=BOX)


def test_double_well_found_and_classified():
    found = find_critical_points(double_well(), starts=MultistartConfig(n_grid=60))
    assert len(found) == 3
    locs = np.array([p.location for p in found])
    assert np.allclose(locs, [[-1, 0], [0, 0], [1, 0]], atol=1e-9)
    assert [p.morse_index for p in found] == [0, 1, 0]
    assert [p.sign_index for p in found] == [1, -1, 1]
    assert np.allclose(found[0].eigenvalues, [2, 8], rtol=1e-6)
    assert not any(p.degenerate for p in found)


@given(st.integers(0, 10_000))
def test_search_independent_of_seed_stream(seed):
    found = find_critical_points(double_well(), starts=MultistartConfig(n_grid=40, rng_seed=seed))
    locs = np.array([p.location for p in found])
    assert locs.shape == (3, 2) and np.allclose(locs, [[-1, 0], [0, 0], [1, 0]], atol=1e-9)


def test_region_restricts_search():
    found = find_critical_points(double_well(), BallAround((1.0, 0.0), 0.5), MultistartConfig(n_grid=30))
    assert len(found) == 1 and np.allclose(found[0].location, [1, 0])
    with pytest.raises(InvalidInputError):
        AnnulusAroundHole(0.1, 0.5).contains(np.zeros((1, 2)), double_well())


def _point(loc, gnorm):
    H = np.eye(2)
    return CriticalPoint(np.array(loc, dtype=float), 0.0, gnorm, H, np.ones(2), 0, False, 1)


@given(st.permutations(range(6)))
def test_dedup_order_independent(perm):
    pts = [_point([0, 0], 1e-9), _point([1e-7, 0], 1e-10), _point([1, 1], 1e-9),
           _point([1, 1 + 5e-8], 2e-9), _point([-1, 0.5], 1e-9), _point([0.5, 0.5], 3e-9)]
    out = _dedup([pts[i] for i in perm], 1e-5)
    assert [tuple(p.location) for p in out] == [(-1, 0.5), (1e-7, 0), (0.5, 0.5), (1, 1)]


def test_degenerate_quartic():
    ev = FunctionEvaluator(gradient=lambda p: np.array([4 * p[0] ** 3, 2 * p[1]]), bounds=BOX)
    # Newton is only linear at a degenerate minimum, so the step test is relaxed.
    cp = newton_refine(ev, [0.5, 0.3], step_tol=1e-2)
    assert cp.degenerate and cp.morse_index == 0
    assert np.linalg.norm(cp.location) < 2e-3


def test_newton_failure_reasons():
    sloped = FunctionEvaluator(gradient=lambda p: np.array([1.0, 2 * p[1]]), bounds=BOX)
    with pytest.raises(NonConvergenceError) as err:
        newton_refine(sloped, [0.3, 0.2])
    assert err.value.reason == "stalled"
    with pytest.raises(NonConvergenceError) as err:
        newton_refine(double_well(), [3.0, 0.0])
    assert err.value.reason == "left-domain"
    quartic = FunctionEvaluator(gradient=lambda p: np.array([4 * p[0] ** 3, 2 * p[1]]), bounds=BOX)
    with pytest.raises(NonConvergenceError) as err:
        newton_refine(quartic, [0.5, 0.3], max_iter=2)
    assert err.value.reason == "max-iterations"


def test_classify_uses_analytic_hessian_when_present():
    ev = double_well()
    ev.hessian = lambda p: np.diag([12 * p[0] ** 2 - 4, 2.0])
    cp = classify(ev, [0.0, 0.0])
    assert np.array_equal(cp.eigenvalues, [-4, 2])


def radial(extra=0.0):
    # f = (r^2 - 1/4)^2 + extra * x: a circle of minima at r = 1/2 when extra = 0.
    return FunctionEvaluator(
        gradient=lambda p: 4 * (p @ p - 0.25) * p + np.array([extra, 0.0]),
        inside=lambda p: p @ p < 1, bounds=BOX)


def test_ring_detection_analytic():
    assert detect_degenerate_ring(radial(), (0, 0), (0.2, 0.9)) == pytest.approx(0.5, abs=1e-12)
    assert detect_degenerate_ring(radial(0.05), (0, 0), (0.2, 0.9)) is None
    with pytest.raises(InvalidInputError):
        detect_degenerate_ring(radial(), (0, 0), (0.2, 1.2))
    with pytest.raises(InvalidInputError):
        detect_degenerate_ring(radial(), (0, 0), (0.5, 0.2))


def test_ring_detection_concentric_annulus():
    eps = 0.1
    ev = RobinEvaluator(PuncturedDomain(Ball(), (0.0, 0.0), eps))
    r = detect_degenerate_ring(ev, (0, 0), (2 * eps, 0.8), n_angles=12, n_radii=24)
    assert r == pytest.approx(annulus_ring_radius_2d(eps), abs=1e-9)


def test_punctured_disk_search():
    pd = PuncturedDomain(Ball(), (0.3, 0.0), 1e-2)
    ev = RobinEvaluator(pd)
    found = find_critical_points(ev, starts=MultistartConfig(n_grid=150))
    assert len(found) == 2
    assert sorted(p.morse_index for p in found) == [0, 1]
    for p in found:
        assert abs(p.location[1]) < 1e-7
        # an independent gradient route agrees that the point is critical
        assert np.linalg.norm(robin_gradient(pd, p.location, method="boundary_formula")) < 1e-7


def _pred(loc, idx):
    return PredictedCriticalPoint(np.array(loc, dtype=float), idx, "test", 1.0, np.zeros(2))


def test_compare_to_prediction():
    found = [_point([0.11, 0.0], 0.0), _point([-0.5, 0.0], 0.0)]
    pred = [_pred([0.1, 0.0], 1), _pred([0.0, 0.2], -1), _pred([-0.48, 0.0], 1)]
    rep = compare_to_prediction(found, pred, robin_at_P=0.0)
    assert rep.cardinality_mismatch and rep.unmatched_predicted == [1] and rep.unmatched_found == []
    first = rep.pairs[0]
    assert (first["found"], first["predicted"]) == (0, 0)
    assert first["relative_error"] == pytest.approx(0.1)
    assert first["index_agrees"] and first["robin_drift"] == 0.0
    assert not compare_to_prediction(found, pred[::2]).cardinality_mismatch
    with pytest.raises(InvalidInputError):
        compare_to_prediction(found, [PredictedCriticalPoint(np.zeros(3), 1, "t", 1.0, np.zeros(3))])
