"""Maps from real-valued agent actions to unit-norm combiners.

Two maps are provided:

* :func:`direct_map` reads a ``2*n_rx`` real vector as the real and
  imaginary parts of the combiner and normalises it.
* :class:`BeamModule` is a small network taking a beam direction ``alpha``
  and half-width ``beta`` and emitting the combiner whose pattern covers
  that range.

Beam angles live on ``[-pi/2, pi/2]`` and map linearly onto the phase-step
axis ``psi = pi*sin(theta)`` of the array via ``psi = 2*alpha``. A beam
``(alpha, beta)`` therefore covers ``psi`` in ``[2(alpha-beta), 2(alpha+beta)]``.
Use :func:`beam_angle` to convert a physical angle of arrival.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array import array_response, psi_array_response
from .nn import MLP, Adam, ParamStore, Tape
from .nn import autodiff as ad

HALF_PI = np.pi / 2
MIN_BETA = np.deg2rad(0.5)


def direct_map(a) -> np.ndarray:
    """``w = (a[:N] + j a[N:]) / ||.||`` for one action or a batch ``(..., 2N)``."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] % 2:
        raise ValueError("direct-map actions need an even length 2*n_rx")
    n = a.shape[-1] // 2
    w = a[..., :n] + 1j * a[..., n:]
    norm = np.linalg.norm(w, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ValueError("cannot normalise an all-zero action")
    return w / norm


def beta_max(alpha):
    """Largest admissible half-width for direction ``alpha``."""
    return np.minimum(HALF_PI, np.abs(HALF_PI - np.abs(alpha)))


def beam_angle(theta):
    """Beam-angle coordinate of a physical angle of arrival ``theta``."""
    return np.pi * np.sin(theta) / 2.0


@dataclass(frozen=True)
class BeamSpec:
    alpha: float
    beta: float

    def __post_init__(self):
        if not -HALF_PI - 1e-12 <= self.alpha <= HALF_PI + 1e-12:
            raise ValueError(f"alpha={self.alpha} outside [-pi/2, pi/2]")
        if not 0.0 < self.beta <= beta_max(self.alpha) + 1e-12:
            raise ValueError(f"beta={self.beta} outside (0, beta_max(alpha)]")

    @property
    def beta_max(self) -> float:
        return float(beta_max(self.alpha))


@dataclass(frozen=True)
class PsiIntervals:
    """Covered and uncovered parts of ``[-pi, pi]`` for one beam, as closed intervals."""

    inside: tuple[tuple[float, float], ...]
    outside: tuple[tuple[float, float], ...]

    @staticmethod
    def _measure(parts) -> float:
        return float(sum(hi - lo for lo, hi in parts))

    @property
    def inside_measure(self) -> float:
        return self._measure(self.inside)

    @property
    def outside_measure(self) -> float:
        return self._measure(self.outside)

    def contains(self, psi) -> np.ndarray:
        psi = np.asarray(psi)
        mask = np.zeros(psi.shape, dtype=bool)
        for lo, hi in self.inside:
            mask |= (psi >= lo) & (psi <= hi)
        return mask


def _inside_bounds(alpha, beta):
    lo = np.maximum(-np.pi, 2.0 * (np.asarray(alpha) - beta))
    hi = np.minimum(np.pi, 2.0 * (np.asarray(alpha) + beta))
    return lo, hi


def psi_intervals(spec: BeamSpec) -> PsiIntervals:
    lo, hi = (float(v) for v in _inside_bounds(spec.alpha, spec.beta))
    outside = tuple((a, b) for a, b in ((-np.pi, lo), (hi, np.pi)) if b > a)
    return PsiIntervals(((lo, hi),), outside)


def sample_beam_spec(rng: np.random.Generator, size: int | None = None):
    """``alpha ~ U[-pi/2, pi/2]``, ``beta ~ U(0, beta_max(alpha)]``.

    With ``size`` given, returns two arrays instead of a :class:`BeamSpec`.
    """
    n = 1 if size is None else size
    alpha = rng.uniform(-HALF_PI, HALF_PI, size=n)
    beta = beta_max(alpha) * (1.0 - rng.random(n))
    # alpha exactly at +-pi/2 leaves no room for a beam
    beta = np.maximum(beta, np.finfo(float).tiny)
    if size is None:
        return BeamSpec(float(alpha[0]), float(beta[0]))
    return alpha, beta


def sample_psi(alpha, beta, k: int, rng: np.random.Generator):
    """Draw ``k`` inside and ``k`` outside phase steps per beam.

    Returns ``(psi_in, psi_out, has_outside)`` with shapes ``(B, k)``,
    ``(B, k)`` and ``(B,)``. Rows without an outside region hold zeros.
    """
    alpha = np.atleast_1d(alpha)
    beta = np.atleast_1d(beta)
    lo, hi = _inside_bounds(alpha, beta)
    B = alpha.size
    psi_in = lo[:, None] + rng.random((B, k)) * (hi - lo)[:, None]
    left = lo + np.pi
    total = left + (np.pi - hi)
    u = rng.random((B, k)) * total[:, None]
    psi_out = np.where(u < left[:, None], -np.pi + u, hi[:, None] + (u - left[:, None]))
    has_outside = total > 0.0
    psi_out[~has_outside] = 0.0
    return psi_in, psi_out, has_outside


# ---------------------------------------------------------------- beam module


@dataclass(frozen=True)
class MapTrainingConfig:
    n_rx: int = 32
    batch: int = 1000
    K: int = 1000
    epsilon: float = 1.0
    updates: int = 5000
    lr: float = 1e-3
    hidden: int = 128
    seed: int = 0


class BeamModule:
    """Feedforward ``(alpha, beta) -> w`` map: 2 inputs, two tanh layers, ``2*n_rx`` affine outputs."""

    def __init__(self, n_rx: int, hidden: int = 128, rng: np.random.Generator | None = None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_rx = n_rx
        self.hidden = hidden
        self.store = ParamStore()
        self.net = MLP.create(self.store, "beam", (2, hidden, hidden, 2 * n_rx), rng)

    @staticmethod
    def scale_inputs(alpha, beta) -> np.ndarray:
        return np.stack([np.asarray(alpha) / HALF_PI, np.asarray(beta) / HALF_PI], axis=-1)

    def outputs(self, alpha, beta) -> ad.Tensor:
        """Raw ``(B, 2*n_rx)`` network outputs, recorded on any active tape."""
        x = self.scale_inputs(np.atleast_1d(alpha), np.atleast_1d(beta))
        return self.net(x)

    def combiners(self, alpha, beta, clamp: bool = True) -> np.ndarray:
        """Unit-norm combiners ``(B, n_rx)`` for arrays of beam parameters."""
        beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
        if clamp:
            beta = np.maximum(beta, MIN_BETA)
        out = self.outputs(alpha, beta).value
        if np.any(np.linalg.norm(out, axis=-1) == 0.0):
            raise ValueError("beam module produced an all-zero output")
        return direct_map(out)

    def __call__(self, spec: BeamSpec) -> np.ndarray:
        return beam_map_forward(self, spec)

    def num_parameters(self) -> int:
        return self.store.num_parameters()


def beam_map_forward(module: BeamModule, spec: BeamSpec) -> np.ndarray:
    return module.combiners(spec.alpha, spec.beta)[0]


def _psi_responses(psi: np.ndarray, n: int):
    k = np.arange(n)
    phase = psi[..., None] * k
    s = 1.0 / np.sqrt(n)
    return np.cos(phase) * s, np.sin(phase) * s


def pattern_magnitude(module: BeamModule, alpha, beta, psi) -> ad.Tensor:
    """``g = |w^H a_psi(psi)|`` as a ``(B, K)`` tensor, differentiable w.r.t. the module."""
    out = module.outputs(alpha, beta)
    n = module.n_rx
    norm = ad.sqrt((ad.square(out)).sum(axis=1, keepdims=True))
    w = out / norm
    wr = ad.reshape(w[:, :n], (-1, n, 1))
    wi = ad.reshape(w[:, n:], (-1, n, 1))
    ar, ai = _psi_responses(np.asarray(psi), n)
    re = ad.matmul(ar, wr) + ad.matmul(ai, wi)
    im = ad.matmul(ai, wr) - ad.matmul(ar, wi)
    g2 = ad.reshape(ad.square(re) + ad.square(im), psi.shape)
    return ad.sqrt(g2 + 1e-30)


def beam_module_loss(module: BeamModule, alpha, beta, psi_in, psi_out, has_outside,
                     epsilon: float = 1.0) -> ad.Tensor:
    """Batch mean of ``-E_in[g] + E_out[g] + Var_out(g) + epsilon*Var_in(g)``.

    Outside terms are dropped for beams that cover the whole ``psi`` range.
    """
    g_in = pattern_magnitude(module, alpha, beta, psi_in)
    g_out = pattern_magnitude(module, alpha, beta, psi_out)
    m_in = g_in.mean(axis=1, keepdims=True)
    m_out = g_out.mean(axis=1, keepdims=True)
    var_in = ad.square(g_in - m_in).mean(axis=1)
    var_out = ad.square(g_out - m_out).mean(axis=1)
    keep = np.asarray(has_outside, dtype=np.float64)
    per_beam = -ad.reshape(m_in, (-1,)) + (ad.reshape(m_out, (-1,)) + var_out) * keep
    per_beam = per_beam + epsilon * var_in
    return per_beam.mean()


def train_beam_module(cfg: MapTrainingConfig, rng: np.random.Generator | None = None,
                      callback=None):
    """Fit a :class:`BeamModule` with Adam on freshly sampled beams each update.

    Returns ``(module, losses)``. ``callback(update, loss)`` is invoked after
    every update when given.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    module = BeamModule(cfg.n_rx, cfg.hidden, rng)
    opt = Adam(module.store, lr=cfg.lr)
    losses = np.empty(cfg.updates)
    for i in range(cfg.updates):
        alpha, beta = sample_beam_spec(rng, cfg.batch)
        psi_in, psi_out, has_out = sample_psi(alpha, beta, cfg.K, rng)
        module.store.zero_grad()
        with Tape() as tape:
            loss = beam_module_loss(module, alpha, beta, psi_in, psi_out, has_out, cfg.epsilon)
        tape.backward(loss)
        opt.step(module.store.grads())
        losses[i] = float(loss.value)
        if callback is not None:
            callback(i, losses[i])
    return module, losses


# ---------------------------------------------------------------- codebooks and patterns


def codebook_specs(q: int, sector=(-HALF_PI, HALF_PI)) -> list[BeamSpec]:
    """Split ``sector`` (beam-angle units) into ``q`` equal slices."""
    if q < 1:
        raise ValueError("codebook needs at least one beam")
    lo, hi = float(sector[0]), float(sector[1])
    if not -HALF_PI - 1e-12 <= lo < hi <= HALF_PI + 1e-12:
        raise ValueError("sector must be an increasing range inside [-pi/2, pi/2]")
    half = (hi - lo) / (2 * q)
    if half < MIN_BETA:
        raise ValueError(f"{q} beams over this sector are narrower than the module supports")
    return [BeamSpec(min(max(lo + (2 * i + 1) * half, -HALF_PI), HALF_PI), half) for i in range(q)]


def build_codebook(module: BeamModule, q: int, sector=(-HALF_PI, HALF_PI)) -> list[np.ndarray]:
    specs = codebook_specs(q, sector)
    W = module.combiners([s.alpha for s in specs], [s.beta for s in specs])
    return list(W)


def sector_for_aoa_range(theta_max: float = np.pi / 3) -> tuple[float, float]:
    """Beam-angle sector covering physical angles ``[-theta_max, theta_max]``."""
    b = float(beam_angle(theta_max))
    return (-b, b)


def in_out_gain(module: BeamModule, alpha, beta, n_grid: int = 2048):
    """Mean ``|w^H a_psi|^2`` inside and outside each beam on a dense ``psi`` grid.

    Returns two arrays of shape ``(B,)``; ``nan`` marks beams with an empty region.
    """
    alpha = np.atleast_1d(alpha)
    beta = np.atleast_1d(beta)
    psi = np.linspace(-np.pi, np.pi, n_grid, endpoint=False) + np.pi / n_grid
    W = module.combiners(alpha, beta, clamp=False)
    gains = np.abs(W.conj() @ psi_array_response(psi, module.n_rx).T) ** 2
    lo, hi = _inside_bounds(alpha, beta)
    inside = (psi[None, :] >= lo[:, None]) & (psi[None, :] <= hi[:, None])
    with np.errstate(invalid="ignore"):
        g_in = np.where(inside, gains, 0).sum(1) / inside.sum(1)
        g_out = np.where(~inside, gains, 0).sum(1) / (~inside).sum(1)
    return g_in, g_out


@dataclass
class PatternTable:
    beam_index: np.ndarray
    theta_deg: np.ndarray
    gain_linear: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.beam_index.size


def beam_patterns(combiners, n_grid: int = 1000) -> PatternTable:
    """Reference gain of every combiner on ``n_grid`` physical angles over +-90 degrees."""
    theta = np.linspace(-HALF_PI, HALF_PI, n_grid)
    A = array_response(theta, len(combiners[0]))
    W = np.asarray(combiners)
    gains = np.abs(W.conj() @ A.T) ** 2
    q = W.shape[0]
    return PatternTable(
        beam_index=np.repeat(np.arange(q), n_grid),
        theta_deg=np.tile(np.rad2deg(theta), q),
        gain_linear=gains.reshape(-1),
    )
