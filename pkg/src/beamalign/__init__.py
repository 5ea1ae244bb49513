"""Reinforcement-learning testbed for initial-access mmWave beam alignment.

Modules
-------
array       ULA responses, channel draws, gain metrics
env         episodic beam-alignment environment
maps        direct map and trainable beamforming module
nn          float64 autodiff, MLP/GRU stacks, Adam
ppo         recurrent actor-critic and PPO updates
baselines   perfect-CSI MRC, OMP-based MRC, codebook sweep
harness     training/evaluation orchestration and CSV/checkpoint output
"""
from .array import Channel, array_response, beamforming_gain, psi_array_response, reference_gain, sample_channel
from .env import BeamAlignEnv, EnvConfig, VectorEnv
from .maps import BeamModule, BeamSpec, direct_map

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "array_response",
    "beamforming_gain",
    "psi_array_response",
    "reference_gain",
    "sample_channel",
    "BeamAlignEnv",
    "EnvConfig",
    "VectorEnv",
    "BeamModule",
    "BeamSpec",
    "direct_map",
]
