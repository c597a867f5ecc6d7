"""
Robin function of the disk and of a concentric annulus
=======================================================

The solver is checked against the closed form on the unit disk, then used on
the annulus 0.1 < |x| < 1, where the critical points form a whole circle.
"""

import numpy as np

from punctured_robin.critical import RobinEvaluator, detect_degenerate_ring
from punctured_robin.domains import Ball, PuncturedDomain
from punctured_robin.exact_kernels import KernelContext, robin_ball
from punctured_robin.harmonic import robin_hessian

ctx = KernelContext.for_dim(2)

# numeric and closed-form Robin function along a radius
disk = RobinEvaluator(Ball())
X = np.column_stack([np.linspace(0, 0.9, 7), np.zeros(7)])
for x, numeric, exact in zip(X, disk.values(X), robin_ball(X, ctx)):
    print(f"|x| = {x[0]:.2f}   solver {numeric: .12f}   closed form {exact: .12f}")

# the Hessian at the centre is (1/pi) I
print("Hessian at 0 times pi:\n", np.round(np.pi * robin_hessian(Ball(), np.zeros(2)), 8))

# punch a hole at the centre: the gradient is radial and vanishes on a circle
annulus = RobinEvaluator(PuncturedDomain(Ball(), (0.0, 0.0), 0.1))
r = detect_degenerate_ring(annulus, (0.0, 0.0), (0.2, 0.8))
print(f"circle of critical points at radius {r:.12f}")
