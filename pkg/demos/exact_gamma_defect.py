"""
Curvature-dimension inequality in exact rational arithmetic.

For polynomial u the defect Gamma_2(u) - (L_a u)^2 / N is itself a
polynomial with rational coefficients.  Random even polynomials give a
nonnegative defect at every sample point; the quadratics
u = alpha (r^2 + |y - y0|^2) + gamma make the defect the zero
polynomial identically, which is the equality case behind the
rigidity theorem.
"""
from fractions import Fraction as F

import numpy as np

from weinstein import BesselWeights, PolyField, cd_defect, cd_defect_values

w = BesselWeights((F(1), F(0)))  # a = 1, one axial coordinate
nv = 2
r = PolyField.variable(0, nv)
y = PolyField.variable(1, nv)

u = r**2 * y + y**3 * F(1, 3) - r**4 * F(2, 7)
d = cd_defect(u, w)
pts = [(F(1), F(1)), (F(1, 2), F(-3, 4)), (F(7, 5), F(2, 3))]
print("u = r^2 y + y^3/3 - 2 r^4/7")
for pt, val in zip(pts, cd_defect_values(u, w, pts)):
    print(f"  defect at {tuple(map(str, pt))} = {val}  (float {float(val):.6g})")

q = (r**2 + (y - F(2, 5)) ** 2) * F(-5, 7) + F(1, 9)
print("\nu = -5/7 (r^2 + (y - 2/5)^2) + 1/9")
print("  defect polynomial == 0:", cd_defect(q, w) == PolyField.zero(nv))

rng = np.random.default_rng(7)
worst = None
for _ in range(200):
    poly = PolyField.zero(nv)
    for _ in range(4):
        er = 2 * int(rng.integers(0, 3))
        ey = int(rng.integers(0, 5))
        c = F(int(rng.integers(-9, 10)), int(rng.integers(1, 8)))
        poly = poly + PolyField.constant(c, nv) * r**er * y**ey
    pt = (F(int(rng.integers(3, 40)), 20), F(int(rng.integers(-40, 41)), 21))
    val = cd_defect_values(poly, w, [pt])[0]
    assert val >= 0
    worst = val if worst is None else min(worst, val)
print(f"\n200 random even polynomials: min defect = {worst} (never negative)")
