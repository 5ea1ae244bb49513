"""
A recurrent agent on a two-antenna array
========================================

With two antennas the agent's action is just four numbers, the real and
imaginary parts of the combiner. A GRU policy sees each received symbol and
picks the next probe; after a couple of hundred PPO updates it should beat
a policy that picks actions at random.
"""

# %%
# What does random achieve?
# -------------------------
# Actions drawn uniformly from the box, normalised to a combiner, give the
# reference level for "learned something".
import numpy as np

from beamalign.env import EnvConfig
from beamalign.maps import direct_map
from beamalign.ppo import PolicyNet, PpoConfig, PpoTrainer, collect_rollouts

rng = np.random.default_rng(0)
w = direct_map(rng.uniform(-1, 1, (50_000, 4)))
theta = rng.uniform(-np.pi / 3, np.pi / 3, 50_000)
h = np.exp(1j * np.pi * np.outer(np.sin(theta), [0, 1])) / np.sqrt(2)
print(f"random policy mean gain: {np.mean(np.abs(np.sum(w.conj() * h, 1)) ** 2):.3f}")

# %%
# Training
# --------
# Small batches keep each update well under a second on a laptop; a larger
# step size than the default makes progress visible within 200 updates.
cfg = PpoConfig(batch_episodes=64, workers=64, minibatch_episodes=32, lr=1e-3)
env = EnvConfig(n_rx=2, T=5, L=1, snr_db=20.0, seed=0)
trainer = PpoTrainer(PolicyNet(2, "direct", cfg, rng=np.random.default_rng(0)), env, cfg)
curve = []
for i in range(200):
    curve.append(trainer.train_step().mean_reward)
    if i % 50 == 49:
        print(f"update {i + 1:3d}: mean terminal reward {np.mean(curve[-50:]):.3f}")

# %%
# Evaluating the mean action
# --------------------------
# Dropping the exploration noise gives the policy's best guess on fresh
# channels from the evaluation stream.
batch = collect_rollouts(trainer.policy, env, 2000, stream=1, deterministic=True)
print(f"deterministic policy mean gain: {batch.terminal_rewards.mean():.3f}")
