"""
Returning before leaving a disk
===============================

Exact hitting probabilities from the lattice Dirichlet problem, compared with
the logarithmic profile and with walk-on-squares Monte Carlo.
"""

import math

from dynwalk import hitting_prob_exact, hitting_prob_mc
from dynwalk.estimators import fit_lawler_constant

n = 1024
for r in (2, 8, 32, 128, 512):
    h = hitting_prob_exact(n, (r, 0))
    log_profile = (math.log2(n) - math.log2(r)) / math.log2(n)
    mc = hitting_prob_mc(n, (r, 0), 50_000, seed=r)
    print(f"|x|={r:4d}  exact {h:.4f}  log profile {log_profile:.4f}  "
          f"MC {mc.mean:.4f} +- {mc.stderr:.4f}")

# smallest C (base-2 logs) that puts every value inside the +-C/log n band
C = fit_lawler_constant([64, 256, 1024], [(1, 0), (4, 0), (16, 0), (3, 3)])
print(f"fitted C = {C:.3f}")
