"""Small float64 neural toolkit: tape autodiff, MLP/GRU stacks, Adam."""
from .autodiff import Tape, Tensor
from .layers import MLP, GruStack, ParamStore, gru_forward, gru_step, mlp_forward
from .optim import Adam, adam_step, clip_global_norm, global_norm

__all__ = [
    "Tape",
    "Tensor",
    "MLP",
    "GruStack",
    "ParamStore",
    "gru_forward",
    "gru_step",
    "mlp_forward",
    "Adam",
    "adam_step",
    "clip_global_norm",
    "global_norm",
]
