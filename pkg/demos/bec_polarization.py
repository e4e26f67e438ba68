"""Leaf entropy histogram for BEC(0.5) as the tree deepens."""

import numpy as np

from polarmix import channel as ch
from polarmix.construct import build_plan, potential_trace

plan = build_plan(ch.bec(0.5), 2, 10, Q=1024)
for j in range(0, plan.t + 1, 2):
    H = plan.level_values(j)
    frac = np.mean((H <= 0.05) | (H >= 0.95))
    print(f"level {j:2d}: {H.size:5d} channels, {frac:.3f} outside (0.05, 0.95)")
print("potential trace (alpha=0.1):", np.round(potential_trace(plan, 0.1), 4))
