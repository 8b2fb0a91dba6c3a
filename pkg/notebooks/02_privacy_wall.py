"""
The privacy wall
================

At fixed eta the TAN approximation predicts a constant budget.  The true RDP
budget agrees for sigma above ~2 and explodes when sigma gets small.
"""

import math

from tandp import planner
from tandp.accountant import ratio_diagnostic

eta, delta = 0.95, 1e-6
grid = planner.sigma_grid(0.3, 5.0, 48)[::4]

for steps in (1_000, 10_000, 100_000):
    result = planner.privacy_wall_sweep(eta, delta, steps, grid)
    print(f"S = {steps}")
    for row in result.rows:
        bar = "#" * min(60, int(row.eps_rdp))
        print(f"  sigma={row.sigma:4.2f}  eps={row.eps_rdp:8.2f}  tan={row.eps_tan:5.2f}  {bar}")

###############################################################################
# Why: g_alpha / (alpha eta_step^2) stays near 1 for large sigma only.
eta_step = 3.9e-3
for sigma in (0.5, 1.0, 2.0, 4.0, 8.0):
    q = eta_step * math.sqrt(2) * sigma
    ratios = [ratio_diagnostic(q, sigma, a) for a in (2, 8, 32)]
    print(f"sigma={sigma:3.1f}  ratio at alpha 2/8/32: "
          + "  ".join(f"{r:10.4g}" for r in ratios))
