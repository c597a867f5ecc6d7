"""
A hole at the centre of a perturbed ellipse
===========================================

At the centre of the ellipse the gradient vanishes, so a hole there gives
four critical points on the axes: two minima and two saddles.  The Hessian
eigenvalues at the centre set their distance from the hole.
"""

import numpy as np

from punctured_robin.asymptotics import solve_r_hat_eps
from punctured_robin.critical import RobinEvaluator, find_critical_points
from punctured_robin.domains import PerturbedEllipsoid, PuncturedDomain
from punctured_robin.ellipsoid import run_study
from punctured_robin.harmonic import robin_hessian

dom = PerturbedEllipsoid((1.0, 2.0), 0.1)
lam = np.diag(robin_hessian(dom, np.zeros(2)))
print("Hessian eigenvalues at the centre:", lam.round(6))

for eps in (1e-2, 3e-3):
    found = find_critical_points(RobinEvaluator(PuncturedDomain(dom, (0.0, 0.0), eps)))
    print(f"\neps = {eps:g}: {len(found)} critical points")
    for p in found:
        axis = int(np.argmax(np.abs(p.location)))
        r_hat = solve_r_hat_eps(eps, lam[axis])
        print(f"  x = {p.location.round(5)}  index {p.morse_index}  "
              f"|x| / r_hat = {np.linalg.norm(p.location) / r_hat:.3f}")

# eigenvalues at the centre as the ellipse departs from the disk
study = run_study(2, (1.0, 2.0))
print("\ndelta   numeric             printed slope       first order")
for d, num, pred, fo in zip(study.delta_grid, study.numeric, study.predicted, study.first_order):
    print(f"{d:.2f}   {num.round(6)}   {pred.round(6)}   {fo.round(6)}")
