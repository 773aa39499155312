from .checkpoint import checkpoint_load, checkpoint_save
from .network import SegNet, SegNetConfig
from .train import TrainConfig, TrainResult, train

__all__ = [
    "SegNet",
    "SegNetConfig",
    "TrainConfig",
    "TrainResult",
    "train",
    "checkpoint_save",
    "checkpoint_load",
]
