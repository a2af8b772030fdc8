"""
Projections
===========

Primal iterates live in a box; inequality multipliers live in the
intersection of the nonnegative orthant and a ball, while equality
multipliers are free.
"""

import numpy as np

from pushpull_pd import DualSet, canonical_instance, project_box, project_dual

inst = canonical_instance(42)
print(project_box([5.0, -7.0], inst.feasible_set))

ds = DualSet(p=2, q=1, radius=2.5)
for lam in ([3.0, 4.0, -9.0], [-1.0, 0.5, 2.0], [0.1, 0.2, 0.0]):
    print(lam, "->", project_dual(np.array(lam), ds))

# clipping first, then scaling, gives the exact nearest point
lam = np.array([-3.0, 4.0, 1.0])
p = project_dual(lam, ds)
print("projected twice equals once:", np.array_equal(project_dual(p, ds), p))
