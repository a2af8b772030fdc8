"""
Checking the ergodic rate
=========================

The step-weighted average of the network-average iterate over rounds
n/2..n should have an objective gap that shrinks at least like
1 / (sum of step sizes). fit_rate tabulates gap times step sum.
"""

from pushpull_pd import (
    StepSchedule,
    canonical_instance,
    canonical_schedule,
    run,
    solve_centralized,
    uniform_weights,
)
from pushpull_pd.analysis import fit_rate

inst = canonical_instance(42)
sched = canonical_schedule()
cert = solve_centralized(inst)
trace = run(inst, sched, uniform_weights(sched), StepSchedule(2.0, 0.6), rounds=10_000,
            record_every=10_000, monitor=())

fit = fit_rate(trace, inst, cert)
for n, g, S, prod in list(zip(fit.n, fit.gap, fit.step_sum, fit.product))[::5]:
    print(f"n={n:6d}  gap={g:+.3e}  step sum={S:8.2f}  product={prod:+.3e}")
print("log-log slope of |gap|:", round(fit.slope, 3), " stabilized:", fit.stabilized)
