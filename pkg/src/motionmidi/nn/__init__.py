from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    attention,
    backward,
    concat,
    div,
    embed,
    exp,
    gather_rows,
    getitem,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mul,
    pad_axis,
    powc,
    relu,
    reshape,
    rng,
    sigmoid,
    softmax,
    sqrt,
    stack,
    sub,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .params import ParamStore, glorot
from .optim import AdamState, Schedule, adam_step, lr
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, finite_difference_check, max_error
from . import layers

__all__ = [
    "AdamState",
    "CheckpointError",
    "GradCheckResult",
    "NonFiniteError",
    "ParamStore",
    "Schedule",
    "ShapeError",
    "Tensor",
    "adam_step",
    "add",
    "attention",
    "backward",
    "concat",
    "div",
    "embed",
    "exp",
    "finite_difference_check",
    "gather_rows",
    "getitem",
    "glorot",
    "layer_norm",
    "layers",
    "load_checkpoint",
    "log",
    "log_softmax",
    "lr",
    "matmul",
    "max_error",
    "mul",
    "pad_axis",
    "powc",
    "relu",
    "reshape",
    "rng",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "sqrt",
    "stack",
    "sub",
    "take",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
]
