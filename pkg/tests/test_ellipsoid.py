import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from punctured_robin.ellipsoid import (first_order_eigenvalues, numeric_hessian_eigenvalues,
                                       predicted_eigenvalues, run_study)
from punctured_robin.errors import InvalidInputError
from punctured_robin.exact_kernels import KernelContext

alphas2 = st.lists(st.floats(0.1, 5), min_size=2, max_size=2).map(sorted)


def test_predicted_examples():
    assert np.allclose(predicted_eigenvalues(2, (1.0, 2.0), 0.0), 1 / math.pi)
    assert np.allclose(predicted_eigenvalues(3, (1.0, 2.0, 3.0), 0.0), 1 / (2 * math.pi))
    assert np.allclose(predicted_eigenvalues(2, (1.0, 1.0), 0.1), 0.397887, atol=1e-6)


@given(alphas2, st.floats(0.01, 0.2))
def test_predicted_slope_and_ordering(alpha, delta):
    a = np.array(alpha)
    two_point = (predicted_eigenvalues(2, a, delta) - predicted_eigenvalues(2, a, 0.0)) / delta
    omega = KernelContext.for_dim(2).omega_n
    assert np.allclose(two_point, ((1) * (-4) + 24 * a) / (8 * omega))
    assert np.all(np.diff(predicted_eigenvalues(2, a, delta)) >= 0)


@pytest.mark.parametrize("dim,alpha", [(2, (0.25, 0.75)), (2, (0.5, 0.5)), (3, (0.5, 1.0, 1.5))])
def test_first_order_agrees_with_printed_when_trace_matches(dim, alpha):
    # The two slopes coincide exactly when sum(alpha) = N(N-1)/2.
    assert np.allclose(first_order_eigenvalues(dim, alpha, 0.07), predicted_eigenvalues(dim, alpha, 0.07))


def test_input_validation():
    with pytest.raises(InvalidInputError):
        predicted_eigenvalues(2, (2.0, 1.0), 0.1)
    with pytest.raises(InvalidInputError):
        predicted_eigenvalues(2, (1.0, 2.0, 3.0), 0.1)
    with pytest.raises(InvalidInputError):
        numeric_hessian_eigenvalues(2, (1.0, 2.0), 0.3)


def test_numeric_baseline_and_symmetry():
    lam, diag = numeric_hessian_eigenvalues(2, (1.0, 2.0), 0.0, return_diagnostics=True)
    assert np.allclose(lam, 1 / math.pi, atol=1e-5)
    lam, diag = numeric_hessian_eigenvalues(2, (1.0, 2.0), 0.05, return_diagnostics=True)
    assert lam[0] < lam[1]
    assert diag["off_diagonal"] < 1e-6 and diag["grad_norm"] < 1e-7


def test_equal_alpha_gives_double_eigenvalue():
    lam = numeric_hessian_eigenvalues(2, (1.5, 1.5), 0.05)
    assert lam[1] - lam[0] < 1e-6


def test_first_order_residual_is_second_order():
    res = [np.max(np.abs(numeric_hessian_eigenvalues(2, (1.0, 2.0), d) - first_order_eigenvalues(2, (1.0, 2.0), d)))
           for d in (0.02, 0.04)]
    assert res[1] / res[0] == pytest.approx(4, rel=0.1)


def test_study_sorts_grid_and_validates():
    study = run_study(2, (1.0, 2.0), (0.04, 0.02))
    assert study.delta_grid == (0.02, 0.04)
    assert len(study.numeric) == 2 and not study.failures
    with pytest.raises(InvalidInputError):
        run_study(2, (1.0, 2.0), (0.02, 0.3))
