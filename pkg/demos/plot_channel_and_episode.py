"""
Channels, probes and the terminal reward
========================================

A single receive array listens to a user through a few propagation paths.
This walk-through samples such channels, plays one alignment episode by
hand and shows why a matched combiner is the ceiling every method is
measured against.
"""

# %%
# Array responses
# ---------------
# Each antenna sees the same plane wave with a phase step of ``pi*sin(theta)``.
# Responses are unit norm, so the gain of a combiner against a single path
# lies in ``[0, 1]``.
import numpy as np

from beamalign.array import array_response, beamforming_gain, reference_gain, sample_channel
from beamalign.baselines import mrc_csi
from beamalign.env import BeamAlignEnv, EnvConfig

a = array_response(np.deg2rad(20.0), 8)
print("|a| =", np.linalg.norm(a))
print("phase steps (deg):", np.round(np.rad2deg(np.angle(a[1:] / a[:-1])), 2))

# %%
# Beam patterns
# -------------
# The pattern of a combiner is its gain against a path from every angle.
# A combiner matched to 20 degrees peaks there; sidelobes fall off with the
# array size.
theta = np.deg2rad(np.arange(-90, 91, 10))
for n in (4, 16):
    g = reference_gain(theta, array_response(np.deg2rad(20.0), n))
    print(f"n={n:2d}", " ".join(f"{x:4.2f}" for x in g))

# %%
# An episode
# ----------
# The environment hides the channel. Each step the agent hands over a
# unit-norm combiner and gets back the noisy received symbol as a real pair.
# Only the last combiner is scored.
env = BeamAlignEnv(EnvConfig(n_rx=16, T=5, L=2, snr_db=10.0, seed=3))
obs = env.reset(episode=0)
rng = np.random.default_rng(0)
for t in range(4):
    w = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    obs, reward, done = env.step(w / np.linalg.norm(w))
    print(f"t={t} obs={np.round(obs, 3)} reward={reward}")
obs, reward, done = env.step(mrc_csi(env.channel))
print("matched combiner on the last step ->", reward, done)

# %%
# Random versus matched
# ---------------------
# Random combiners capture about ``1/n`` of the channel energy, while the
# matched combiner always reaches 1.
gains = []
for _ in range(2000):
    ch = sample_channel(rng, 1, 16)
    w = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    gains.append(beamforming_gain(w / np.linalg.norm(w), ch))
print(f"random: {np.mean(gains):.4f}  (1/16 = {1 / 16:.4f})")
