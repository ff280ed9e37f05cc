"""Sketching operators and the coordinate-wise error guarantee.

Sketch-and-solve compresses an n-row least-squares problem to r rows.  The
composed CountSketch+SRHT operator additionally keeps every *coordinate*
of the sketched solution close to the exact one, which is the property the
private-median aggregation feeds on.
"""

import math

import numpy as np

from dpsearch.harness.instances import kappa_instance
from dpsearch.regression import solve_least_squares
from dpsearch.sketch import ComposedSketch, GaussianSketchSpec, fwht

x = np.zeros(8)
x[0] = 1.0
print("fwht of e_0 (first Hadamard column):", fwht(x.copy()))
y = np.arange(8.0)
z = y.copy()
fwht(fwht(z))
print("fwht twice recovers 8*x exactly:", np.array_equal(z, 8 * y))

n, d = 4096, 32
problem, meta = kappa_instance(n, d, 4.0, seed=1)
spec = ComposedSketch(n, m=8192, r=4096, seed=2)
x_sketch = solve_least_squares(spec.apply(problem.U), spec.apply(problem.b))
x_star = np.array(meta["x_star"])
sigma_min = np.linalg.svd(problem.U, compute_uv=False)[-1]
bound = (0.25 / math.sqrt(d)) * meta["opt_cost"] / sigma_min
print(f"\ncomposed sketch on n={n}, d={d}, kappa=4:")
print(f"  coordinate-wise error |x_sketch - x*|_inf = {np.abs(x_sketch - x_star).max():.5f}")
print(f"  guarantee bound (alpha'/sqrt(d)) * cost / sigma_min = {bound:.5f}")
cost = np.linalg.norm(problem.U @ x_sketch - problem.b)
print(f"  cost ratio vs optimum: {cost / meta['opt_cost']:.6f}")

g = GaussianSketchSpec(n=1000, r=256, seed=3)
col = g.column(123)
print("\nGaussian sketch columns regenerate bit-identically:",
      np.array_equal(col, GaussianSketchSpec(1000, 256, 3).column(123)))
print(f"column norm^2 (expect about 1): {np.sum(col ** 2):.3f}")
