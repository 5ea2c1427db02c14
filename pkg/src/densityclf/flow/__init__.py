from .maf import MafArch, MafModel, maf_log_density, maf_sample
from .made import (
    DimensionMismatch,
    InvalidOrdering,
    MadeNetwork,
    MaskSpec,
    build_masks,
    layer_forward,
    layer_inverse,
    made_forward,
)
from .train import Adam, FlowTrainConfig, NonFiniteLoss, TrainResult, maf_train, nll_and_grads

__all__ = [
    "Adam",
    "DimensionMismatch",
    "FlowTrainConfig",
    "InvalidOrdering",
    "MadeNetwork",
    "MafArch",
    "MafModel",
    "MaskSpec",
    "NonFiniteLoss",
    "TrainResult",
    "build_masks",
    "layer_forward",
    "layer_inverse",
    "made_forward",
    "maf_log_density",
    "maf_sample",
    "maf_train",
    "nll_and_grads",
]
