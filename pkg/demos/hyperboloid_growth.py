"""
Recursion on facets and the size of the formulation
====================================================

A one-sheet hyperboloid is a ruled surface: through every point passes a
straight line lying in the surface.  Such a surface has no interior extreme
points, so its hull is the hull of its intersections with the facets of the
box, and the construction recurses into each facet.  The number of leaves
therefore grows quickly with the dimension.
"""

import numpy as np

from quadhull.corpus import hyperboloid_family
from quadhull.hullcore import build_hull_report, ruled_line_witness
from quadhull.oracle import sample_surface, subsample
from quadhull.reduction import canonicalize
from quadhull.socmodel import flatten, stats

# A line through a point of w1^2 + w2^2 - u^2 = 1 stays on the surface.
inst = hyperboloid_family(3)
c = canonicalize(inst)
point = subsample(sample_surface(c.as_instance(), density=50), 1, seed=3)[0]
u, v = ruled_line_witness(c, point)
direction = np.r_[u, v]
for t in (-10.0, -1.0, 1.0, 10.0):
    print(f"residual at offset {t:+5.1f}: {c.residual(point + t * direction):.2e}")

# The root node recurses on the six facets of the cube; each facet carries a
# lower-dimensional conic which is classified again.
report = build_hull_report(inst)
print("\n".join(report.trace[:8]), "\n...")

# Leaves, variables and cones for n = 2, 3, 4.
for n in (2, 3, 4):
    report = build_hull_report(hyperboloid_family(n))
    s = stats(flatten(report.hull))
    print(f"n = {n}: leaves {report.leaves:4d}  variables {s['variables']:5d}  cones {s['soc_blocks']:4d}")
