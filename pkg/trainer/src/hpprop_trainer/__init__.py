"""Training side of the learned descent direction.

Builds Gaussian-noise patch pairs from a clean-image corpus, trains the
7-layer dilated CNN on the noise residual with MSE loss, folds batch norm
into the convolutions, and exports HPW1 weights for the inference engine.
"""

from .data import TrainConfig, build_patch_dataset
from .model import DescentNet, fold_batch_norm, train
from .export import export_hpw1, read_hpw1

__all__ = [
    "TrainConfig",
    "build_patch_dataset",
    "DescentNet",
    "fold_batch_norm",
    "train",
    "export_hpw1",
    "read_hpw1",
]
