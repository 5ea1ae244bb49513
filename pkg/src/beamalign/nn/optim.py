"""Adam and global gradient-norm clipping over named arrays."""
from __future__ import annotations

import numpy as np


def global_norm(grads: dict[str, np.ndarray]) -> float:
    # Sorted so the float sum does not depend on dict order.
    return float(np.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in sorted(grads))))


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients by ``max_norm / norm`` when their joint L2 norm exceeds it.

    Returns ``(clipped, norm_before)``.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads), norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              m: dict[str, np.ndarray], v: dict[str, np.ndarray], lr: float,
              betas=(0.9, 0.999), eps: float = 1e-8, t: int = 1) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update; ``m`` and ``v`` are updated in place."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise FloatingPointError(f"non-finite gradients in {bad}")
    b1, b2 = betas
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    out = {}
    for k, p in params.items():
        g = grads[k]
        m[k] = b1 * m[k] + (1.0 - b1) * g
        v[k] = b2 * v[k] + (1.0 - b2) * g * g
        out[k] = p - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return out


class Adam:
    """Stateful wrapper applying :func:`adam_step` to a :class:`ParamStore`."""

    def __init__(self, store, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(t.value) for k, t in store.items()}
        self.v = {k: np.zeros_like(t.value) for k, t in store.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        new = adam_step(self.store.values(), grads, self.m, self.v, self.lr,
                        self.betas, self.eps, self.t)
        for k, value in new.items():
            self.store[k].value = value

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"m/{k}": a for k, a in self.m.items()}
        out.update({f"v/{k}": a for k, a in self.v.items()})
        return out

    def load_state(self, arrays: dict[str, np.ndarray], t: int) -> None:
        for k in self.m:
            self.m[k] = np.array(arrays[f"m/{k}"], dtype=np.float64)
            self.v[k] = np.array(arrays[f"v/{k}"], dtype=np.float64)
        self.t = int(t)
