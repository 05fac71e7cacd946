"""Multichannel time-domain speech enhancement networks built on a small autodiff core."""
from .analysis import count_parameters, receptive_field, summarize
from .config import PRESETS, ModelConfig, TrainConfig, get_preset
from .frontend import AudioBuffer, FrameSpec
from .models import Model, build_model
from .tensor import Tensor

__all__ = [
    "AudioBuffer",
    "FrameSpec",
    "Model",
    "ModelConfig",
    "PRESETS",
    "Tensor",
    "TrainConfig",
    "build_model",
    "count_parameters",
    "get_preset",
    "receptive_field",
    "summarize",
]
__version__ = "0.1.0"
