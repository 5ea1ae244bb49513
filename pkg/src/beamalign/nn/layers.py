"""Parameter storage, feedforward stacks and GRU stacks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class ParamStore:
    """Ordered, uniquely named collection of trainable float64 arrays.

    Each entry is a leaf :class:`Tensor`; gradients produced by
    ``Tape.backward`` land in ``store[name].grad``.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def values(self) -> dict[str, np.ndarray]:
        return {k: t.value for k, t in self._params.items()}

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient buffers, zero-filled for parameters the last backward did not reach."""
        return {
            k: (t.grad if t.grad is not None else np.zeros_like(t.value))
            for k, t in self._params.items()
        }

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def num_parameters(self) -> int:
        return sum(t.value.size for t in self._params.values())

    def load(self, arrays: dict[str, np.ndarray], strict: bool = True) -> None:
        for name, t in self._params.items():
            if name not in arrays:
                if strict:
                    raise KeyError(f"missing parameter {name!r}")
                continue
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != t.value.shape:
                raise ValueError(f"{name}: shape {value.shape} != {t.value.shape}")
            t.value = value.copy()

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self._params.items()}


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------- feedforward


@dataclass
class MLP:
    """Affine layers with ``tanh`` between them; the last layer can stay affine."""

    store: ParamStore
    prefix: str
    sizes: tuple[int, ...]
    final_activation: bool = False

    @classmethod
    def create(cls, store: ParamStore, prefix: str, sizes: Sequence[int],
               rng: np.random.Generator, final_activation: bool = False) -> "MLP":
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            store.add(f"{prefix}.W{i}", uniform_fan_in(rng, n_in, (n_in, n_out)))
            store.add(f"{prefix}.b{i}", uniform_fan_in(rng, n_in, (n_out,)))
        return cls(store, prefix, sizes, final_activation)

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def __call__(self, x) -> Tensor:
        return mlp_forward(self.store, self.prefix, self.num_layers, x, self.final_activation)


def mlp_forward(store: ParamStore, prefix: str, num_layers: int, x,
                final_activation: bool = False) -> Tensor:
    """Run ``x`` (shape ``(..., n_in)``) through the named affine/tanh chain."""
    h = x if isinstance(x, Tensor) else Tensor(x)
    n_in = store[f"{prefix}.W0"].shape[0]
    if h.shape[-1] != n_in:
        raise ValueError(f"{prefix}: input width {h.shape[-1]} != {n_in}")
    for i in range(num_layers):
        h = ad.matmul(_as_matrix(h), store[f"{prefix}.W{i}"]) + store[f"{prefix}.b{i}"]
        h = _restore(h, x)
        if i < num_layers - 1 or final_activation:
            h = ad.tanh(h)
    return h


def _as_matrix(h: Tensor) -> Tensor:
    # 1-D inputs are treated as a batch of one.
    return ad.reshape(h, (1, -1)) if h.ndim == 1 else h


def _restore(h: Tensor, x) -> Tensor:
    ndim = x.ndim if hasattr(x, "ndim") else np.ndim(x)
    return ad.reshape(h, (-1,)) if ndim == 1 else h


# ---------------------------------------------------------------- GRU


@dataclass
class GruStack:
    """Stacked GRU layers of constant hidden width.

    Per layer: ``z, r = sigmoid(x Wx + h Wh + b)``,
    ``n = tanh(x Wxn + (r * h) Whn + bn)``, ``h' = z * h + (1 - z) * n``.
    The reset gate multiplies the hidden state before its transform.
    """

    store: ParamStore
    prefix: str
    input_size: int
    hidden_size: int
    num_layers: int

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_size: int, hidden_size: int,
               num_layers: int, rng: np.random.Generator) -> "GruStack":
        H = hidden_size
        for layer in range(num_layers):
            n_in = input_size if layer == 0 else H
            p = f"{prefix}.l{layer}"
            store.add(f"{p}.Wx", uniform_fan_in(rng, n_in, (n_in, 3 * H)))
            store.add(f"{p}.Wh", uniform_fan_in(rng, H, (H, 2 * H)))
            store.add(f"{p}.Whn", uniform_fan_in(rng, H, (H, H)))
            store.add(f"{p}.b", np.zeros(3 * H))
        return cls(store, prefix, input_size, hidden_size, num_layers)

    def initial_state(self, batch: int) -> list[np.ndarray]:
        return [np.zeros((batch, self.hidden_size)) for _ in range(self.num_layers)]

    def step(self, x, hidden: Sequence) -> list[Tensor]:
        """Advance every layer by one timestep; returns the new per-layer states."""
        return gru_step(self, x, hidden)

    def __call__(self, x_seq: Sequence, h0: Sequence | None = None):
        return gru_forward(self, x_seq, h0)


def _cell(store: ParamStore, p: str, x: Tensor, h: Tensor, H: int) -> Tensor:
    xw = ad.matmul(x, store[f"{p}.Wx"]) + store[f"{p}.b"]
    gates = ad.sigmoid(xw[:, : 2 * H] + ad.matmul(h, store[f"{p}.Wh"]))
    z, r = gates[:, :H], gates[:, H:]
    n = ad.tanh(xw[:, 2 * H:] + ad.matmul(r * h, store[f"{p}.Whn"]))
    return z * h + (1.0 - z) * n


def gru_step(stack: GruStack, x, hidden: Sequence) -> list[Tensor]:
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 2 or x.shape[1] != stack.input_size:
        raise ValueError(f"GRU input must be (batch, {stack.input_size}), got {x.shape}")
    if len(hidden) != stack.num_layers:
        raise ValueError(f"expected {stack.num_layers} hidden states, got {len(hidden)}")
    new = []
    inp = x
    for layer in range(stack.num_layers):
        h = hidden[layer]
        h = h if isinstance(h, Tensor) else Tensor(h)
        if h.shape != (x.shape[0], stack.hidden_size):
            raise ValueError(f"hidden state shape {h.shape} != {(x.shape[0], stack.hidden_size)}")
        inp = _cell(stack.store, f"{stack.prefix}.l{layer}", inp, h, stack.hidden_size)
        new.append(inp)
    return new


def gru_forward(stack: GruStack, x_seq: Sequence, h0: Sequence | None = None):
    """Unroll the stack over ``x_seq`` (a sequence of ``(batch, input)`` arrays).

    Returns ``(outputs, final_hidden)`` where ``outputs[t]`` is the top layer
    state after step ``t``. ``h0`` defaults to zeros.
    """
    if len(x_seq) == 0:
        raise ValueError("GRU input sequence is empty")
    batch = (x_seq[0].shape if hasattr(x_seq[0], "shape") else np.shape(x_seq[0]))[0]
    hidden = list(h0) if h0 is not None else stack.initial_state(batch)
    outputs = []
    for x in x_seq:
        hidden = gru_step(stack, x, hidden)
        outputs.append(hidden[-1])
    return outputs, hidden
