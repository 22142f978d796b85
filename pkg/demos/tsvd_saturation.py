"""
Truncation level and the saturation of canonical correlations
=============================================================

Keeping the m leading eigen-directions on each side gives correlations
that can only grow with m and equal the population values once m reaches
the number of components.
"""

import numpy as np

from fcca import population_cca, population_operators, random_model
from fcca.tsvd import cca_tsvd, truncated_tikhonov

rng = np.random.default_rng(3)
model = random_model(rng, J=4, p=32)
blocks = population_operators(model)
print("population rho^2:", np.round(population_cca(blocks).rho ** 2, 6))

print("\n  m   rho_k(m)^2")
for m in range(1, model.J + 1):
    print(f"  {m}   {np.round(cca_tsvd(blocks, m).rho ** 2, 6)}")

# The hybrid adds a ridge on the retained directions; as alpha shrinks it
# collapses onto the pure truncation.
print("\n  alpha     distance to pure truncation (m = 2)")
for a in (1.0, 0.1, 0.01, 1e-4):
    print(f"  {a:<8g}  {truncated_tikhonov(blocks, a, 2).distance_to_tsvd:.3e}")
