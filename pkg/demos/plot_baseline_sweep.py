"""
Classical baselines across SNR
==============================

Three reference methods bracket what an agent can hope for: the matched
combiner with perfect channel knowledge, a sparse channel estimate from
four random probes, and a sweep over a four-beam codebook. The harness runs
all of them on the same channels, which is what makes the rows comparable.
"""

# %%
# A pretrained beam module
# ------------------------
# The codebook sweep needs a beam module. A quick one is enough here and is
# saved in the same checkpoint format the command line uses.
import tempfile
from pathlib import Path

from beamalign import harness
from beamalign.config import ExperimentConfig

out = Path(tempfile.mkdtemp())
common = dict(output_dir=str(out), n_rx=16, T=5, L=1, seed=0)
ckpt = harness.run_map_training(ExperimentConfig(
    mode="train-map", map_batch=64, map_K=64, map_updates=400, map_hidden=32, map_lr=3e-3, **common))
print("beam module:", ckpt)

# %%
# The sweep
# ---------
# Every row pairs a method with an SNR. The hash column fingerprints the
# channels each row saw, so equal hashes mean paired comparisons.
cfg = ExperimentConfig(mode="baselines", map_checkpoint=str(ckpt), eval_episodes=500,
                       snr_list=[-10.0, 0.0, 10.0, 20.0, 30.0], **common)
rows = harness.read_csv(harness.run_baselines(cfg))
print(f"{'method':<11}{'snr':>6}{'gain':>8}{'dB':>8}{'ci95':>8}  hash")
for r in rows:
    print(f"{r['method']:<11}{float(r['snr_db']):6.0f}{float(r['mean_gain']):8.3f}"
          f"{float(r['mean_gain_db']):8.2f}{float(r['ci95']):8.3f}  {r['channel_hash']}")
