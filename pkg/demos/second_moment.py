"""
Second moment of the exceptional-time measure
=============================================

L is the Lebesgue measure of the times in [0, 1] at which the walk passes all
levels.  (E L)^2 / E(L^2) bounds P(L > 0) from below; the correlation
function f(t) controls E(L^2).
"""

import numpy as np

from dynwalk import desk_schedule, estimate_f, sample_realization, scan_E_M
from dynwalk.estimators import bootstrap_stderr, second_moment_lower_bound

sched = desk_schedule(3, 4, 2)

L = np.array([scan_E_M(sample_realization(64, 1.0, s), sched).measure() for s in range(2000)])
bound = second_moment_lower_bound(L)
se = bootstrap_stderr(L, second_moment_lower_bound, 300, seed=0)
print(f"E L = {L.mean():.4f}   P(L > 0) = {np.mean(L > 0):.4f}   bound = {bound:.4f} +- {se:.4f}")

# f(t) = P(E(0) and E(t)) / P(E)^2: large at small t, tending to 1
for t in (1 / 64, 1 / 16, 1 / 4, 1, 4):
    f = estimate_f(sched, 3, t, 100_000, seed=1)
    print(f"t={t:8.5f}  f={f.ratio:.3f} +- {f.stderr:.3f}")
