"""Classical reference methods: perfect-CSI MRC, OMP-estimated MRC, codebook sweep."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import AOA_LIMIT, Channel, array_response, complex_normal
from .env import BeamAlignEnv


def mrc_csi(ch) -> np.ndarray:
    """Matched combiner ``h / ||h||``; the gain upper bound."""
    h = ch.h if isinstance(ch, Channel) else np.asarray(ch, dtype=np.complex128)
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("MRC undefined for a zero channel")
    return h / norm


def random_sensing_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """``count`` i.i.d. complex Gaussian vectors normalised to unit norm, shape ``(count, n)``."""
    W = complex_normal(rng, (count, n))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


@dataclass(frozen=True)
class OmpConfig:
    """Dictionary of ``grid_size`` array responses on ``[-aoa_limit, aoa_limit]``."""

    sensing: np.ndarray
    grid_size: int = 256
    iterations: int = 1
    aoa_limit: float = AOA_LIMIT

    def __post_init__(self):
        sensing = np.atleast_2d(np.asarray(self.sensing, dtype=np.complex128))
        object.__setattr__(self, "sensing", sensing)
        if self.iterations < 1:
            raise ValueError("OMP needs at least one iteration")
        if self.grid_size < self.n_rx:
            raise ValueError("grid must have at least n_rx atoms")
        if not np.allclose(np.linalg.norm(sensing, axis=1), 1.0, atol=1e-9):
            raise ValueError("sensing vectors must have unit norm")

    @property
    def n_rx(self) -> int:
        return self.sensing.shape[1]

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.aoa_limit, self.aoa_limit, self.grid_size)

    @property
    def dictionary(self) -> np.ndarray:
        """Atoms as columns, shape ``(n_rx, grid_size)``."""
        return array_response(self.grid, self.n_rx).T

    @classmethod
    def random(cls, n_rx: int, num_probes: int, rng: np.random.Generator, **kw) -> "OmpConfig":
        return cls(random_sensing_vectors(rng, num_probes, n_rx), **kw)


@dataclass
class OmpResult:
    h_hat: np.ndarray
    support: list
    coefficients: np.ndarray
    residual_norm: float
    degenerate: bool


def omp_estimate(y, cfg: OmpConfig, dictionary: np.ndarray | None = None) -> OmpResult:
    """Greedy sparse channel estimate from ``y_t = w_t^H h + noise``.

    Each iteration picks the atom whose projected column best correlates
    (after normalisation) with the residual, then refits all selected
    coefficients by least squares.
    """
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if y.size != cfg.sensing.shape[0]:
        raise ValueError(f"{y.size} measurements for {cfg.sensing.shape[0]} sensing vectors")
    if y.size < cfg.iterations:
        raise ValueError("fewer measurements than OMP iterations")
    A = cfg.dictionary if dictionary is None else dictionary
    Phi = cfg.sensing.conj() @ A
    col_norm = np.linalg.norm(Phi, axis=0)
    col_norm[col_norm == 0.0] = np.inf
    if not np.any(y):
        return OmpResult(np.zeros(cfg.n_rx, complex), [], np.zeros(0, complex), 0.0, True)

    support: list[int] = []
    residual = y
    coef = np.zeros(0, complex)
    for _ in range(cfg.iterations):
        score = np.abs(Phi.conj().T @ residual) / col_norm
        score[support] = -1.0
        support.append(int(np.argmax(score)))
        coef, *_ = np.linalg.lstsq(Phi[:, support], y, rcond=None)
        residual = y - Phi[:, support] @ coef
    h_hat = A[:, support] @ coef
    return OmpResult(h_hat, support, coef, float(np.linalg.norm(residual)),
                     not np.any(h_hat))


def run_mrc_omp_episode(env: BeamAlignEnv, cfg: OmpConfig, episode: int = 0,
                        dictionary: np.ndarray | None = None) -> float:
    """Probe with the fixed sensing vectors, estimate ``h``, combine with its MRC."""
    if cfg.sensing.shape[0] != env.cfg.T - 1:
        raise ValueError("OMP needs exactly T-1 sensing vectors")
    env.reset(episode)
    y = np.empty(env.cfg.T - 1, dtype=np.complex128)
    for t, w in enumerate(cfg.sensing):
        obs, _, _ = env.step(w)
        y[t] = obs[0] + 1j * obs[1]
    est = omp_estimate(y, cfg, dictionary)
    w = array_response(0.0, env.cfg.n_rx) if est.degenerate else est.h_hat / np.linalg.norm(est.h_hat)
    _, reward, _ = env.step(w)
    return reward


def run_exhaustive_episode(env: BeamAlignEnv, codebook, episode: int = 0) -> float:
    """Probe every codebook beam once and keep the one with the strongest return."""
    codebook = [np.asarray(c) for c in codebook]
    if len(codebook) != env.cfg.T - 1:
        raise ValueError(f"codebook has {len(codebook)} beams, need T-1 = {env.cfg.T - 1}")
    env.reset(episode)
    power = np.empty(len(codebook))
    for q, c in enumerate(codebook):
        obs, _, _ = env.step(c)
        power[q] = obs @ obs
    _, reward, _ = env.step(codebook[int(np.argmax(power))])
    return reward
