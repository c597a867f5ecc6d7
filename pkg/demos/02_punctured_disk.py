"""
Critical points of a punctured disk
===================================

A hole of radius eps at P = (0.3, 0) creates a saddle between P and the
boundary, in the direction of grad R(P).  Its distance to P is compared
with the scale r_eps from the radius equation r = ln r / ln eps.
"""

import math
import warnings

import numpy as np
from scipy.optimize import brentq

from punctured_robin.asymptotics import (GradientCaseInput, expansion_grad, predict_count,
                                         predict_gradient_case, solve_r_eps)
from punctured_robin.critical import RobinEvaluator, compare_to_prediction, find_critical_points
from punctured_robin.domains import Ball, PuncturedDomain, ValidityWarning
from punctured_robin.exact_kernels import KernelContext, robin_ball

ctx = KernelContext.for_dim(2)
P = np.array([0.3, 0.0])
g = robin_ball(P, ctx, order=1)
R_P = float(robin_ball(P, ctx))
print(f"grad R(P) = {g}, predicted count {predict_count(1, True)}")

for eps in (3e-2, 1e-2, 3e-3):
    ev = RobinEvaluator(PuncturedDomain(Ball(), tuple(P), eps))
    found = find_critical_points(ev)
    pred = predict_gradient_case(GradientCaseInput(eps, g, P), ctx)
    report = compare_to_prediction(found, [pred], robin_at_P=R_P)
    print(f"\neps = {eps:g}: {len(found)} critical points")
    for p in found:
        print(f"  x = {p.location.round(6)}  Morse index {p.morse_index}  R = {p.robin_value:.6f}")
    near = min(found, key=lambda p: np.linalg.norm(p.location - P))
    print(f"  |x - P| / r_eps = {np.linalg.norm(near.location - P) / solve_r_eps(eps):.4f}")
    print(f"  predicted point {pred.location.round(4)}, relative error {report.pairs[0]['relative_error']:.2f}")

# The leading-order gradient is cheap, so its zero can be followed to
# tiny eps.  The ratio creeps towards 1/(pi |grad R(P)|) at a log rate.
print(f"\n1/(pi |grad R(P)|) = {1 / (math.pi * np.linalg.norm(g)):.4f}")
outer_grad = lambda x: robin_ball(x, ctx, order=1)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", ValidityWarning)
    for eps in (1e-2, 1e-5, 1e-20, 1e-100, 1e-300):
        pd = PuncturedDomain(Ball(), tuple(P), eps)
        # 2 eps would round away next to P = 0.3, so start from a fraction of r_eps
        lo = 0.05 * solve_r_eps(eps)
        rho = brentq(lambda t: expansion_grad(P + [t, 0], pd, outer_grad)[0], lo, 0.69, xtol=1e-15)
        print(f"eps = {eps:.0e}: expansion root at |x - P| / r_eps = {rho / solve_r_eps(eps):.3f}")
