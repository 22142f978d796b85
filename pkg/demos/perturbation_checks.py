"""
Eigenprojections under small perturbations
==========================================

A contour integral of the resolvent recovers an eigenprojection, and the
first-order change of that projection leaves a second-order remainder.
"""

import numpy as np

from fcca.grid_core import Grid
from fcca.operators import LinOp, eig_self_adjoint
from fcca.perturbation import SpectralCircle, property_checks, contour_projection, projection_perturbation

g = Grid.counting(2)
B = LinOp(g, g, np.diag([2.0, 1.0]))
flip = LinOp(g, g, np.array([[0.0, 1.0], [1.0, 0.0]]))
E = eig_self_adjoint(B)

for nodes in (16, 32, 64):
    P = contour_projection(E, SpectralCircle(2.0, 0.5, nodes))
    print(f"{nodes:>3d} nodes: contour error {np.abs(P.matrix - np.diag([1.0, 0.0])).max():.2e}")

print("\n  eps      ||exact - first order||")
for eps in (1e-1, 1e-2, 1e-3):
    exact = eig_self_adjoint(B + eps * flip).groups[0].projection - E.groups[0].projection
    first = projection_perturbation(E, eps * flip, 0)
    print(f"  {eps:<7g}  {np.abs((exact - first).matrix).max():.3e}")

print()
for check in property_checks(seed=0):
    print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.value:.4g} ({check.detail})")
