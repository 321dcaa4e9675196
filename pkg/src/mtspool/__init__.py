"""Multivariate time series classification via learned graphs and
hierarchical variational pooling."""

__version__ = "0.1.0"

from .autodiff import Tape, Tensor
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = ["Tensor", "Tape", "KERNEL_BACKEND", "__version__"]
