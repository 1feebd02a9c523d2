"""
Escaping a growing barrier
==========================

At a fixed time the walk comes within n^(1/2 - 1/(log n)^(1/4 + eps)) of the
origin at some n.  Scanning a grid of times finds slices that stay outside the
barrier over the whole range.
"""

import numpy as np

from dynwalk import desk_schedule, escape_rate_scan, sample_realization

sched = desk_schedule(4, 4, 2)
grid = np.arange(1025) / 1024

fail0 = gain = 0
for seed in range(100):
    rep = escape_rate_scan(sample_realization(sched.s[-1], 1.0, seed), sched, 0.25, grid)
    if not rep.survives[0]:
        fail0 += 1
        gain += rep.survives.any()
print(f"{gain} of {fail0} realizations failing at t=0 have a surviving grid time")

rep = escape_rate_scan(sample_realization(sched.s[-1], 1.0, 7), sched, 0.25, grid)
print("fraction of surviving grid times:", rep.survives.mean())
print("median reach:", int(np.median(rep.reach)), "of", sched.s[-1])
