"""Episodic beam-alignment environment.

An episode freezes one channel and lasts ``T`` steps. Steps ``0..T-2`` are
probes: the agent sees the noisy received symbol ``y = w^H h + w^H n`` as a
real pair. Step ``T-1`` applies the final combiner and pays the noiseless
normalised gain; every other step pays zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array import Channel, beamforming_gain, complex_normal, sample_channel

STREAM_TRAIN = 0
STREAM_EVAL = 1
UNIT_NORM_TOL = 1e-6


def episode_rng(seed: int, stream: int, episode: int) -> np.random.Generator:
    """Independent generator for one episode, keyed by ``(seed, stream, episode)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(episode)]))


@dataclass(frozen=True)
class EnvConfig:
    n_rx: int = 32
    T: int = 5
    L: int = 1
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rx < 1:
            raise ValueError("n_rx must be >= 1")
        if self.T < 2:
            raise ValueError("T must be >= 2 (one probe plus the final combiner)")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)


@dataclass
class EnvState:
    cfg: EnvConfig
    channel: Channel
    t: int = 0
    done: bool = False


def _check_combiner(w: np.ndarray, n_rx: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.complex128)
    if w.shape[-1] != n_rx:
        raise ValueError(f"combiner length {w.shape[-1]} != n_rx {n_rx}")
    norms = np.linalg.norm(w, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ValueError("combiner must have unit norm")
    return w


def reset(cfg: EnvConfig, rng: np.random.Generator):
    """Start an episode: draw a channel, return ``(state, zero observation)``."""
    channel = sample_channel(rng, cfg.L, cfg.n_rx)
    return EnvState(cfg, channel), np.zeros(2)


def step(state: EnvState, w, rng: np.random.Generator):
    """Apply combiner ``w``; returns ``(observation, reward, done)``."""
    if state.done:
        raise RuntimeError("episode already finished; call reset")
    cfg = state.cfg
    w = _check_combiner(w, cfg.n_rx)
    h = state.channel.h
    noise = complex_normal(rng, cfg.n_rx, cfg.noise_var)
    if state.t < cfg.T - 1:
        y = np.vdot(w, h) + np.vdot(w, noise)
        state.t += 1
        return np.array([y.real, y.imag]), 0.0, False
    state.t += 1
    state.done = True
    return np.zeros(2), beamforming_gain(w, h), True


class BeamAlignEnv:
    """Stateful single-episode wrapper around :func:`reset` / :func:`step`."""

    def __init__(self, cfg: EnvConfig, stream: int = STREAM_TRAIN):
        self.cfg = cfg
        self.stream = stream
        self.state: EnvState | None = None
        self.rng: np.random.Generator | None = None

    def reset(self, episode: int = 0) -> np.ndarray:
        self.rng = episode_rng(self.cfg.seed, self.stream, episode)
        self.state, obs = reset(self.cfg, self.rng)
        return obs

    def step(self, w):
        if self.state is None:
            raise RuntimeError("call reset before step")
        return step(self.state, w, self.rng)

    @property
    def channel(self) -> Channel:
        return self.state.channel


@dataclass
class VectorEnv:
    """A batch of independent episodes stepped in lockstep.

    Episode ``i`` of a batch uses exactly the random stream that
    :class:`BeamAlignEnv` would use for the same episode id, so batched and
    sequential runs see identical channels and noise.
    """

    cfg: EnvConfig
    stream: int = STREAM_TRAIN
    channels: list[Channel] = field(default_factory=list)
    H: np.ndarray | None = None
    t: int = 0
    _rngs: list = field(default_factory=list)

    def reset(self, episode_ids) -> np.ndarray:
        self._rngs = [episode_rng(self.cfg.seed, self.stream, e) for e in episode_ids]
        self.channels = [sample_channel(r, self.cfg.L, self.cfg.n_rx) for r in self._rngs]
        self.H = np.stack([c.h for c in self.channels])
        self.t = 0
        return np.zeros((len(self.channels), 2))

    @property
    def num_envs(self) -> int:
        return len(self.channels)

    @property
    def done(self) -> bool:
        return self.t >= self.cfg.T

    def step(self, W):
        """Apply one combiner per episode (``W`` has shape ``(E, n_rx)``)."""
        if self.H is None or self.done:
            raise RuntimeError("batch finished or not reset")
        W = _check_combiner(W, self.cfg.n_rx)
        noise = np.stack([complex_normal(r, self.cfg.n_rx, self.cfg.noise_var) for r in self._rngs])
        E = self.num_envs
        if self.t < self.cfg.T - 1:
            y = np.sum(W.conj() * (self.H + noise), axis=1)
            self.t += 1
            return np.stack([y.real, y.imag], axis=1), np.zeros(E), False
        gain = np.abs(np.sum(W.conj() * self.H, axis=1)) ** 2
        gain /= np.sum(np.abs(self.H) ** 2, axis=1)
        self.t += 1
        return np.zeros((E, 2)), gain, True
