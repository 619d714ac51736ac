"""
The noise schedule
==================

A linear beta schedule fixes how much signal survives at each timestep.
This script prints the signal fraction ``sqrt(alpha_bar_t)`` at a few
timesteps, for the classic 1000-step chain and for the 100-step chain the
toy experiments use.
"""

# %%
# The 1000-step schedule runs beta from 1e-4 to 0.02. By t = T almost no
# signal is left, so x_T is essentially pure noise.
import numpy as np

from negguide import default_schedule, forward_diffuse

for T in (1000, 100):
    s = default_schedule(T)
    marks = [1, T // 4, T // 2, 3 * T // 4, T]
    print(f"T={T:4d}  beta in [{s.betas[0]:.0e}, {s.betas[-1]:.3f}]")
    for t in marks:
        print(f"   t={t:4d}  sqrt(alpha_bar)={np.sqrt(s.alpha_bar(t)):.4f}")

# %%
# Short chains rescale the endpoints by 1000 / T. Keeping the original
# endpoints at T = 100 would leave about 60% of the signal in x_T.
from negguide import make_linear_beta_schedule

naive = make_linear_beta_schedule(100, 1e-4, 0.02)
print(f"unscaled 100-step chain: sqrt(alpha_bar_T) = {np.sqrt(naive.alpha_bar(100)):.3f}")

# %%
# Forward diffusion is a single closed-form draw per timestep.
rng = np.random.default_rng(0)
x0 = np.array([1.0, -0.5, 0.25])
s = default_schedule(100)
for t in (1, 50, 100):
    print(t, np.round(forward_diffuse(x0, t, rng.standard_normal(3), s), 3))
