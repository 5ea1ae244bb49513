"""Central finite-difference check of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tape, Tensor
from .layers import ParamStore


@dataclass
class GradCheckResult:
    names: list
    indices: list
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def rel_errors(self) -> np.ndarray:
        # floor keeps near-zero coordinates from dividing roundoff by roundoff
        denom = np.maximum(np.maximum(np.abs(self.analytic), np.abs(self.numeric)), 1e-6)
        return np.abs(self.analytic - self.numeric) / denom

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max())


def gradcheck(loss_fn: Callable[[], Tensor], store: ParamStore, rng: np.random.Generator,
              n_coords: int = 50, step: float = 1e-5, names=None) -> GradCheckResult:
    """Compare ``loss_fn``'s tape gradient with central differences on random coordinates.

    ``loss_fn`` must be deterministic and read parameters from ``store``.
    """
    names = list(store.names() if names is None else names)
    store.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    grads = store.grads()

    sizes = np.array([store[n].value.size for n in names])
    picks = rng.choice(sizes.sum(), size=min(n_coords, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    chosen_names, chosen_idx, analytic, numeric = [], [], [], []
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[k]
        t = store[name]
        idx = np.unravel_index(int(flat - offsets[k]), t.value.shape)
        orig = t.value[idx]
        t.value[idx] = orig + step
        up = float(loss_fn().value)
        t.value[idx] = orig - step
        down = float(loss_fn().value)
        t.value[idx] = orig
        chosen_names.append(name)
        chosen_idx.append(idx)
        analytic.append(grads[name][idx])
        numeric.append((up - down) / (2 * step))
    return GradCheckResult(chosen_names, chosen_idx, np.array(analytic), np.array(numeric))
