"""Potential and metric-insertion fields are invisible to the mixed transform.

Builds ``d'u + lambda w`` with ``u`` vanishing on the circle, compares its
sinogram against a generic field of the same orders, and prints both maxima.
Run with ``python demos/kernel_fields.py``.
"""

from mixtrans.geometry import gaussian_bump
from mixtrans.tensor_algebra import boundary_vanishing, d_prime, lambda_op, random_polynomial_field
from mixtrans.transforms import FanGrid, sinogram, trace_grid

metric = gaussian_bump(0.05)
grid = FanGrid(16, 16)
k, l = 2, 1

u = boundary_vanishing(random_polynomial_field(k - 1, l, 2, 1, 0, metric)[0])
w = random_polynomial_field(k - 1, l - 1, 2, 1, 1, metric)[0]
kernel = d_prime(u) + lambda_op(w)
generic = random_polynomial_field(k, l, 2, 1, 2, metric)[0]

bundles = trace_grid(metric, grid, 1e-3)
print(f"orders (k, l) = ({k}, {l}) on {metric.name}, {grid.n_beta}x{grid.n_phi} fan, step 1e-3")
print(f"max |L(d'u + lambda w)| = {sinogram(kernel, grid=grid, bundles=bundles).max_abs:.3e}")
print(f"max |L f| (generic f)   = {sinogram(generic, grid=grid, bundles=bundles).max_abs:.3e}")
