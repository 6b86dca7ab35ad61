"""Observed order of the fixed-step RK4 line integrals.

Halves the step four times on a quartic integrand along a curved ray and
prints self-convergence differences and the fitted order.
"""

import numpy as np

from mixtrans.geometry import InwardBoundaryPoint, gaussian_bump
from mixtrans.tensor_algebra import polynomial_field
from mixtrans.transforms import convergence_probe

c = np.zeros((1, 1, 5, 5))
c[0, 0, 4, 0], c[0, 0, 2, 2], c[0, 0, 0, 1] = 1.0, 0.5, 0.3
f = polynomial_field(c, gaussian_bump(0.2, (0.1, 0.0), 0.8))
r = convergence_probe(f, InwardBoundaryPoint(0.5, 0.4), [0.08, 0.04, 0.02, 0.01])
for h, v, d in zip(r.steps, r.values, [float("nan")] + r.differences):
    print(f"step {h:.3f}  value {v:.14f}  diff {d:.3e}")
print(f"observed order {r.order:.3f}")
