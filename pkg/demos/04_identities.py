"""
Boundary-integral identities on a small sphere
==============================================

Each identity integrates a kernel of the exterior ball over |y| = eps and
compares with its closed form.
"""

from collections import defaultdict

from punctured_robin.identities import check_identity, run_suite

c = check_identity("ap6", (2.0, 0.0), 0.1, 2)
print(f"ap6 at x = (2, 0), eps = 0.1: quadrature {c.lhs_quadrature:.15f}, "
      f"closed form {c.rhs_closed_form:.15f}, {c.nodes_used} nodes")


worst = defaultdict(float)
for c in run_suite(n_samples=20):
    key = (c.name, c.dim)
    worst[key] = max(worst[key], c.ratio if c.kind == "bound" else c.rel_err)
for (name, dim), err in sorted(worst.items(), key=lambda kv: (kv[0][1], kv[0][0])):
    label = "max ratio" if name == "ap7" else "max rel err"
    print(f"N={dim}  {name:9s} {label} {err:.2e}")
