"""
Bounding a nonconvex quadratic program
======================================

Maximizing a linear function over S = {x'Qx + a'x = g} within a polytope is
a nonconvex problem.  Over the hull of S the same linear function has the
same maximum, and the hull formulation is a convex conic program.  We
compare the conic optimum with a dense sampling of S on random instances,
and check that applying an affine change of coordinates commutes with
taking the hull.
"""

import numpy as np

from quadhull.affine import AffineMap
from quadhull.corpus import random_instance
from quadhull.hullcore import build_hull
from quadhull.oracle import brute_max
from quadhull.socmodel import flatten, optimize

rng = np.random.default_rng(0)
for seed in range(5):
    inst = random_instance(seed)
    p = flatten(build_hull(inst))
    c = rng.normal(size=inst.n)
    conic = optimize(p, c)
    sampled = brute_max(inst, c)
    print(f"{inst.name}: conic {conic.value:+.8f}  sampled {sampled.value:+.8f}  "
          f"optimizer residual {abs(inst.residual(conic.point)):.1e}")

# The optimizer of a linear objective over the hull can be taken on S itself
# (the printed residual), but in degenerate directions it may be any point of
# a face of the hull.

# Affine maps: the hull of F(S) is F(hull of S).
inst = random_instance(1)
F = AffineMap(rng.normal(size=(inst.n, inst.n)), rng.normal(size=inst.n))
image = inst.substitute(F.inverse())
p, q = flatten(build_hull(inst)), flatten(build_hull(image))
c = rng.normal(size=inst.n)
print("support of F(S):", optimize(q, c).value)
print("support of S along L'c, shifted:", optimize(p, F.L.T @ c).value + c @ F.t)
