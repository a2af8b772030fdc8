"""
A periodic directed network
===========================

No single graph of the schedule is strongly connected, but any four
consecutive ones are. Each round uses a row-stochastic matrix for pulling
iterates and a column-stochastic one for pushing trackers.
"""

import numpy as np

from pushpull_pd import canonical_schedule, check_connectivity, uniform_weights, validate_weights
from pushpull_pd.analysis import estimate_abs_prob

sched = canonical_schedule()
for k, g in enumerate(sched.graphs):
    print(f"graph {k}: edges {g.sorted_edges()}")

for B in (1, 3, 4):
    print(f"strongly connected over every window of {B}:", check_connectivity(sched, B))

ws = uniform_weights(sched)
report = validate_weights(ws, sched)
print("weights valid:", report.ok, " smallest positive entry:", report.eta)

###############################################################################
# Products of the pull matrices collapse to a rank-one matrix whose common
# row is the limiting weight vector.

P = np.eye(6)
for k in range(201):
    P = ws.A(k) @ P
print("row spread after 201 rounds:", np.ptp(P, axis=0).max())
print("limit row:", estimate_abs_prob(ws, horizon=200).mu.round(4))
