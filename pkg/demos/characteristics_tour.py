"""
Weight characteristics along a resolution ladder
================================================

A weight constant is a supremum over all cubes.  On a grid we can only see
cubes down to a few cells, so every estimate is reported with a refinement
trace: the sup recomputed as the grid and the cube levels are refined
together.  A finite constant settles; an infinite one keeps growing.
"""

import numpy as np

from matweight.characteristics import matrix_ap, reverse_holder, scalar_a1, scalar_ap
from matweight.cubes import CubeFamily
from matweight.families import default_grid, sample_family
from matweight.fields import Grid, ScalarField

# %%
# Calibration: constant weights give exactly 1.
g = Grid.cube(0.0, 1.0, 64)
F = CubeFamily.dyadic(g)
print("matrix A_2 of the identity:", matrix_ap(sample_family("constant", g), 2.0, F).value)
print("scalar A_2 of 3.7:         ", scalar_ap(ScalarField(g, np.full(g.shape, 3.7)), 2.0, F).value)

# %%
# One-dimensional powers |x|^a.  x^(-1/2) is in A_1; x^(-3/2) is not even
# locally integrable, and the trace shows it.
for a in (-0.5, -1.5):
    g1 = default_grid("power", 4096, n=1)
    w = sample_family("power", g1, exponent=a)
    est = scalar_a1(w, CubeFamily.dyadic(g1, 10))
    print(f"A_1 of x^{a}: verdict {est.verdict:9s} growth {np.round(est.growth_factors[-3:], 3)}")

# %%
# Reverse Hoelder for x^(-1/2): the exponent s must keep s/2 < 1.
g1 = default_grid("power", 4096, n=1)
w = sample_family("power", g1, exponent=-0.5)
for s in (1.5, 2.5):
    print(f"RH_{s} of x^-0.5:", reverse_holder(w, s, CubeFamily.dyadic(g1, 10)).verdict)

# %%
# A diagonal matrix weight diag(|x_1|^(2 gamma), 1).  Its A_2 constant is
# finite exactly when 2 gamma < 1.  256 cells and 6 levels keep four cells
# per side in the smallest cube.
for gamma in (0.25, 0.75):
    g2 = default_grid("remark-5.2", 256, gamma=gamma)
    W = sample_family("remark-5.2", g2, gamma=gamma)
    est = matrix_ap(W, 2.0, CubeFamily.dyadic(g2, 6))
    print(f"gamma={gamma}: matrix A_2 ~ {est.value:.3f}, verdict {est.verdict}, "
          f"growth {np.round(est.growth_factors, 3)}")
