"""
Why regularization is needed
============================

With fewer paths than grid points the two centered sample spaces intersect,
so the unregularized sample correlation is 1 whatever the population says.
A ridge parameter removes the artefact.
"""

from fcca import decaying_model, fit_tikhonov, fit_unregularized, sample_paths

model = decaying_model(J=20, p=64, rho=0.8)
print("population leading correlation:", 0.8)

print("\n  n      unregularized   degenerate   tikhonov(alpha=0.1)")
for n in (10, 40, 200, 2000):
    paths = sample_paths(model, n, seed=1)
    raw = fit_unregularized(paths)
    ridge = fit_tikhonov(paths, 0.1)
    print(f"  {n:<6d} {raw.rho[0]:.9f}     {str(raw.degenerate):<11s}  {ridge.rho[0]:.4f}")
