"""
Training a small denoiser
=========================

The exact denoiser is convenient, but real models are learned. Here a
three-layer MLP is trained with plain SGD on samples from a few Gaussian
identities. With probability ``dropout`` each training example sees a
learned "null" context instead of its identity, which gives the network
an unconditional mode. We then check its noise predictions against the
closed form.
"""

# %%
import numpy as np

from negguide import GaussianIdentityWorld, TrainConfig, default_schedule, generate_contexts, train_denoiser
from negguide.denoiser import analytic_eps

pool = generate_contexts(4, 8, seed=0)
world = GaussianIdentityWorld.from_pool(pool, sigma=0.3)
rng = np.random.default_rng(0)
x0 = np.concatenate([world.sample(c.id, 500, rng) for c in pool.contexts])
labels = np.repeat(np.arange(4), 500)

s = default_schedule(100)
model = train_denoiser(x0, labels, pool, TrainConfig(epochs=60, lr=1e-2), s)
print("loss: first epoch %.4f, last epoch %.4f" % (model.loss_curve[0], model.loss_curve[-1]))

# %%
# Compare against the exact prediction at a few noise levels.
for t in (10, 50, 90):
    c = pool.contexts[1]
    ab = s.alpha_bar(t)
    xt = np.sqrt(ab) * world.sample(c.id, 500, rng) + np.sqrt(1 - ab) * rng.standard_normal((500, 8))
    err = np.mean((model.predict(xt, t, c) - analytic_eps(world, xt, t, c.id, s)) ** 2)
    print(f"t={t:3d}  eps MSE vs exact: {err:.4f}")
