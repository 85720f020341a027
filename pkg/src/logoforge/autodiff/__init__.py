from .tensor import GradTape, NonFiniteError, Tensor, backward, no_record, stop_gradient
from . import functional
from .optim import AdamState, adam_step, init_adam, lr_linear_decay

__all__ = [
    "GradTape",
    "NonFiniteError",
    "Tensor",
    "backward",
    "no_record",
    "stop_gradient",
    "functional",
    "AdamState",
    "adam_step",
    "init_adam",
    "lr_linear_decay",
]
