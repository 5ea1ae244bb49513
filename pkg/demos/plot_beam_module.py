"""
Learning a beam from a direction and a width
============================================

Rather than letting an agent choose every antenna weight, a small network
can turn two numbers, a pointing direction ``alpha`` and a half-width
``beta``, into a combiner whose pattern covers that range. This script
trains such a module at a small size and inspects the beams it produces.
"""

# %%
# Training
# --------
# Each update draws a batch of random beams and phase steps inside and
# outside each beam, then pushes the gain up inside, down outside and flat
# in both. A few hundred updates at 8 antennas run in seconds.
import numpy as np

from beamalign.array import reference_gain
from beamalign.maps import (
    BeamSpec, MapTrainingConfig, build_codebook, codebook_specs, in_out_gain, sample_beam_spec,
    train_beam_module,
)

cfg = MapTrainingConfig(n_rx=8, batch=64, K=64, updates=600, lr=3e-3, hidden=32, seed=0)
module, losses = train_beam_module(cfg)
print(f"loss: first 50 {losses[:50].mean():.3f}, last 50 {losses[-50:].mean():.3f}")

# %%
# Inside versus outside
# ---------------------
# On a dense grid of phase steps, the mean gain inside a requested range
# should clearly exceed the mean gain outside it.
alpha, beta = sample_beam_spec(np.random.default_rng(1), 100)
g_in, g_out = in_out_gain(module, alpha, beta)
keep = ~np.isnan(g_out)
print(f"inside {g_in[keep].mean():.3f}  outside {g_out[keep].mean():.3f}")

# %%
# A codebook
# ----------
# Splitting the half circle into equal slices gives a codebook with no
# hand design. Each row is one beam's pattern over -90..90 degrees.
specs = codebook_specs(4)
W = build_codebook(module, 4)
theta = np.deg2rad(np.arange(-90, 91, 10))
for s, w in zip(specs, W):
    bar = "".join(" .:-=+*#"[min(7, int(8 * g))] for g in reference_gain(theta, w))
    print(f"alpha={np.rad2deg(s.alpha):6.1f} beta={np.rad2deg(s.beta):5.1f} |{bar}|")

# %%
# Narrow beams are taller
# -----------------------
# Squeezing the same energy into a smaller range raises the peak.
grid = np.linspace(-np.pi / 2, np.pi / 2, 1001)
for b in (10, 30, 90):
    w = module(BeamSpec(0.0, np.deg2rad(b)))
    print(f"beta={b:2d} deg  peak gain {reference_gain(grid, w).max():.3f}")
