"""ULA responses, geometric channel draws and gain metrics.

All complex arithmetic of the package lives here and in :mod:`beamalign.env`;
the learning code only ever sees real arrays (see :func:`to_real` /
:func:`from_real`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AOA_LIMIT = np.pi / 3  # paths arrive within +-60 degrees


def array_response(phi, n: int) -> np.ndarray:
    """Half-wavelength ULA response ``(1/sqrt(n)) exp(j*pi*k*sin(phi))``.

    ``phi`` may be a scalar or an array; the antenna axis is appended last.
    """
    return psi_array_response(np.pi * np.sin(phi), n)


def psi_array_response(psi, n: int) -> np.ndarray:
    """Response parameterised directly by the phase step ``psi`` (``pi*sin(phi)`` for a ULA)."""
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    k = np.arange(n)
    psi = np.asarray(psi, dtype=np.float64)
    return np.exp(1j * psi[..., None] * k) / np.sqrt(n)


@dataclass(frozen=True)
class Channel:
    """Narrowband multipath channel seen by the receive array."""

    gains: np.ndarray
    aoas: np.ndarray
    n_rx: int
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gains = np.atleast_1d(np.asarray(self.gains, dtype=np.complex128))
        aoas = np.atleast_1d(np.asarray(self.aoas, dtype=np.float64))
        if gains.shape != aoas.shape or gains.ndim != 1 or gains.size == 0:
            raise ValueError("gains and aoas must be matching non-empty vectors")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "aoas", aoas)
        object.__setattr__(self, "h", gains @ array_response(aoas, self.n_rx))

    @property
    def num_paths(self) -> int:
        return self.gains.size


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with total variance ``var``."""
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return np.sqrt(var / 2.0) * z


def sample_channel(rng: np.random.Generator, num_paths: int, n: int) -> Channel:
    """Draw ``CN(0,1)`` path gains and AoAs uniform on ``[-60, 60]`` degrees."""
    if num_paths < 1:
        raise ValueError("a channel needs at least one path")
    gains = complex_normal(rng, num_paths)
    aoas = rng.uniform(-AOA_LIMIT, AOA_LIMIT, size=num_paths)
    return Channel(gains, aoas, n)


def _channel_vector(ch) -> np.ndarray:
    return ch.h if isinstance(ch, Channel) else np.asarray(ch, dtype=np.complex128)


def beamforming_gain(w, ch) -> float:
    """Normalised gain ``|w^H h|^2 / ||h||^2`` (1 for a matched combiner)."""
    h = _channel_vector(ch)
    hh = np.vdot(h, h).real
    if hh == 0.0:
        raise ValueError("beamforming gain undefined for a zero channel")
    return float(abs(np.vdot(w, h)) ** 2 / hh)


def reference_gain(theta, c) -> np.ndarray | float:
    """``|c^H a(theta)|^2`` for one combiner over scalar or array ``theta``."""
    c = np.asarray(c, dtype=np.complex128)
    a = array_response(theta, c.size)
    g = np.abs(a @ c.conj()) ** 2
    return float(g) if np.ndim(g) == 0 else g


def is_unit_norm(w, tol: float = 1e-9) -> bool:
    return abs(np.linalg.norm(w) - 1.0) <= tol


def to_real(z) -> np.ndarray:
    """Stack real and imaginary parts along a new trailing axis."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def from_real(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[..., 0] + 1j * x[..., 1]
