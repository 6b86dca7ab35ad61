"""Shear-wave polarization phase and its first-order transform.

On the constant-c flat medium the phase along the horizontal diameter is
``2 omega0``; the remainder of the linearization shrinks like ``omega0^2``.
"""

import math

from mixtrans.elastic import check_linearization, constant_c_flat, random_smooth_medium
from mixtrans.geometry import InwardBoundaryPoint

for medium, entry in [
    (constant_c_flat(), InwardBoundaryPoint(math.pi, 0.0)),
    (random_smooth_medium(0), InwardBoundaryPoint(0.3, 0.4)),
]:
    r = check_linearization(medium, entry, (1e-1, 1e-2, 1e-3), 1e-3)
    d = r.details
    print(f"{medium.name}: L22(f) = {d['L22']:.12f}")
    for w0, th, rem in zip(d["omega0"], d["theta"], d["remainder"]):
        print(f"  omega0 {w0:.0e}  theta {th:.12e}  remainder {rem:.3e}")
    print(f"  remainder slope {d['slope']:.4f}, reduction residual {r.max_residual:.2e}")
