"""
Guidance weight schedules
=========================

With negative guidance, every step combines two noise predictions: one
conditioned on the target identity and one on a negative identity.

    eps = (1 + w) * eps_pos - w * eps_neg

The weight ``w`` can be fixed, or it can ramp linearly from 0 at the start
of sampling (t = T) up to ``w_max`` at the end (t = 0). Early steps lay out
the coarse structure and late steps refine detail. The ramp leaves the early
steps free and pushes away from the negative only once the sample has
committed.
"""

# %%
import numpy as np

from negguide import GuidanceSchedule, combine_noise, guidance_weight

T = 100
schedules = {
    "constant 0.5": GuidanceSchedule.constant(0.5),
    "ramp to 1.0": GuidanceSchedule.linear_ramp(1.0),
    "table": GuidanceSchedule.from_table([(0.0, 1.0), (0.5, 1.0), (1.0, 0.0)]),
}
print("t    " + "  ".join(f"{k:>13}" for k in schedules))
for t in (100, 75, 50, 25, 1, 0):
    print(f"{t:<4d} " + "  ".join(f"{guidance_weight(g, t, T):13.3f}" for g in schedules.values()))

# %%
# With w = 0 the negative branch disappears, and the sampler skips it
# entirely.
eps_pos, eps_neg = np.array([0.2, -0.1]), np.array([0.5, 0.5])
for w in (0.0, 0.5, 1.0):
    print(w, combine_noise(eps_pos, eps_neg, w))
