from . import tensor as ops
from .adam import AdamState, adam_step
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradcheckResult, all_passed, gradcheck
from .params import ParameterStore
from .tensor import ShapeError, Tensor

__all__ = [
    "AdamState", "CheckpointError", "GradcheckResult", "ParameterStore", "ShapeError",
    "Tensor", "adam_step", "all_passed", "gradcheck", "load_checkpoint", "ops",
    "save_checkpoint",
]
