"""Simulator and trainer for free-space 4f convolutional optical networks.

An input image rides on the field amplitude, a learnable elementwise layer
(W * X + B) preprocesses it, a 4f correlator convolves it via a learnable
Fourier-plane phase mask, and detector regions integrate the output
intensity into 10 class scores.  Everything is differentiable by hand
(reverse mode) and trains with plain SGD on MNIST.
"""

from . import backend
from .checkpoint import load_checkpoint, save_checkpoint
from .energy import EnergyReport, energy_report
from .fourier import ShapeError, fft2, hadamard, ifft2, intensity, l2_norm_sq
from .grad import ConsistencyError, Gradients, backward, grad_check
from .mnist import Dataset, Sample, embed, load_dataset_dir, load_idx, split
from .optics import (
    DetectorLayout,
    LayerParams,
    LayoutError,
    Model,
    Region,
    apply_spectral_mask,
    classify,
    forward,
    forward_batch,
    preprocess,
    propagate_4f,
    region_readout,
    shifted_relu,
    superpose_intensity,
)
from .train import (
    MetricsRecord,
    TrainConfig,
    TrainingDivergedError,
    cross_entropy,
    evaluate,
    fit,
    init_model,
    sgd_step,
    softmax,
    train_epoch,
)

__version__ = "0.1.0"

__all__ = [
    "DetectorLayout",
    "Dataset",
    "ConsistencyError",
    "EnergyReport",
    "Gradients",
    "LayerParams",
    "LayoutError",
    "MetricsRecord",
    "Model",
    "Region",
    "Sample",
    "ShapeError",
    "TrainConfig",
    "TrainingDivergedError",
    "apply_spectral_mask",
    "backend",
    "backward",
    "classify",
    "cross_entropy",
    "embed",
    "energy_report",
    "evaluate",
    "fft2",
    "fit",
    "forward",
    "forward_batch",
    "grad_check",
    "hadamard",
    "ifft2",
    "init_model",
    "intensity",
    "l2_norm_sq",
    "load_checkpoint",
    "load_dataset_dir",
    "load_idx",
    "preprocess",
    "propagate_4f",
    "region_readout",
    "save_checkpoint",
    "sgd_step",
    "shifted_relu",
    "softmax",
    "split",
    "superpose_intensity",
    "train_epoch",
    "__version__",
]
