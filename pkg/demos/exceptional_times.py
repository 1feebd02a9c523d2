"""
Exceptional times of a dynamical walk
=====================================

Sample a few realizations, find the exact set of times in [0, 1] at which the
walk passes every level of a small schedule, and look at its size and shape.
"""

import numpy as np

from dynwalk import box_count_dimension, desk_schedule, sample_realization, scan_E_M

# levels at steps 1, 4, 16, 64, 256 with rings sqrt(s)/2 .. 2 sqrt(s)
sched = desk_schedule(4, growth=4, width=2)
print("s =", sched.s)

for seed in range(5):
    r = sample_realization(sched.s[-1], 1.0, seed)
    ind = scan_E_M(r, sched)
    print(f"seed {seed}: {len(ind.intervals):3d} intervals, measure {ind.measure():.3f}")

# the set shrinks as levels are added; measure per level on one realization
r = sample_realization(sched.s[-1], 1.0, 3)
for M in range(sched.M + 1):
    print(f"M={M}: measure {scan_E_M(r, sched.truncate(M)).measure():.3f}")

# box counts of a finite union of intervals: slope 1 once boxes are finer
# than the shortest interval, lower at coarse scales
rep = box_count_dimension(scan_E_M(r, sched), range(1, 13))
print("counts", rep.counts.tolist())
print(f"slope {rep.slope:.3f}")
