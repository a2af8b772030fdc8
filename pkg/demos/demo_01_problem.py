"""
Building a coupled-constraint problem
=====================================

Six agents each own a smooth convex cost and a piece of two coupled
constraints: one quadratic inequality and one affine equality. Only the
sums over agents matter to the global problem.
"""

import numpy as np

from pushpull_pd import canonical_instance, eval_constraints, eval_objective
from pushpull_pd.problem import check_slater, slater_values

inst = canonical_instance(42)
print(f"m={inst.m} agents, n={inst.n}, {inst.p} inequality and {inst.q} equality row(s)")

###############################################################################
# The origin is a strictly feasible point by construction: the inequality
# sum is negative and the equality sum vanishes there.

ineq, eq = slater_values(inst)
print("sum of inequality rows at 0:", ineq, " equality:", eq)
print("strictly feasible:", check_slater(inst))

###############################################################################
# The radius used to truncate the inequality multipliers follows from the
# objective value at that point and the minimum of the objective over the box.

print("multiplier radius:", inst.dual_radius)

###############################################################################
# Local pieces can be evaluated on their own.

x = np.array([0.5, -1.0])
for i in range(3):
    print(i, eval_objective(inst.objectives[i], x), eval_constraints(inst.constraints[i], x))
print("global objective:", inst.objective_value(x))
print("constraint sums :", inst.constraint_sum(x))
