"""Small numpy autograd core: tensors, layers, Adam and checkpoints."""
from .tensor import NoTrace, ShapeMismatch, Tensor, backward
from .layers import (Parameter, ParamStore, bilstm, dense, embedding_sum, lstm,
                     multi_head_attention, transformer_layer)
from .optim import AdamState, StateShapeMismatch, adam_step, zero_grad

__all__ = [
    "AdamState", "NoTrace", "Parameter", "ParamStore", "ShapeMismatch", "StateShapeMismatch",
    "Tensor", "adam_step", "backward", "bilstm", "dense", "embedding_sum", "lstm",
    "multi_head_attention", "transformer_layer", "zero_grad",
]
