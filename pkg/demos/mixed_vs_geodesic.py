"""The mixed transform is a signed geodesic transform of ``Sym A f``.

For each order pair the script evaluates both sides on one ray and prints
them with the sign ``(-1)^l`` that relates them.
"""

from mixtrans.geometry import InwardBoundaryPoint, gaussian_bump
from mixtrans.tensor_algebra import apply_A, full_sym, random_polynomial_field
from mixtrans.transforms import geodesic_ray_transform, mixed_ray_transform, reduction_sign

metric = gaussian_bump(0.1)
entry = InwardBoundaryPoint(0.8, -0.3)
print(f"{'k':>2} {'l':>2} {'L f':>14} {'I(Sym A f)':>14} {'sign':>5}")
for k, l in [(1, 1), (2, 1), (1, 2), (3, 2)]:
    f = random_polynomial_field(k, l, 2, 1, 7, metric)[0]
    lhs = mixed_ray_transform(f, entry, 1e-3)
    rhs = geodesic_ray_transform(full_sym(apply_A(f)), entry, 1e-3)
    print(f"{k:2d} {l:2d} {lhs:14.10f} {rhs:14.10f} {reduction_sign(l):5d}")
