"""Multi-label text CNN: one convolution layer with ReLU, global max
pooling over positions, and a sigmoid output per label.

The convolution/pooling inner loop exists twice: a compiled Cython
extension (:mod:`regcore.cnn._inner`) used when it was built, and a pure
NumPy fallback (:mod:`regcore.cnn.kernels_py`). Selection happens in
:mod:`regcore.cnn.backends`, can be forced with the ``REGCORE_KERNEL``
environment variable (``compiled`` or ``numpy``), and is recorded in every
training history and run manifest. ``benchmarks/bench_kernels.py`` compares
the two.
"""

from .backends import HAVE_COMPILED, available_backends, get_backend
from .checkpoint import load_checkpoint, save_checkpoint
from .config import CnnConfig, CnnParams, TrainHistory, init_params
from .model import (
    TrainingDivergedError,
    bce_loss,
    forward,
    gradients,
    predict,
    predict_probs,
    train,
)

__all__ = [
    "CnnConfig",
    "CnnParams",
    "TrainHistory",
    "TrainingDivergedError",
    "available_backends",
    "bce_loss",
    "forward",
    "get_backend",
    "gradients",
    "init_params",
    "load_checkpoint",
    "predict",
    "predict_probs",
    "save_checkpoint",
    "train",
    "HAVE_COMPILED",
]
