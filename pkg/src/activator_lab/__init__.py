"""activator-lab: GLU-based transformer blocks and baselines on CIFAR,
built on an in-package reverse-mode autodiff engine."""

from .models import ARCHS, ModelConfig, build, paper_config
from .tensor import Tensor, no_grad, set_verify

__all__ = ["ARCHS", "ModelConfig", "Tensor", "build", "no_grad",
           "paper_config", "set_verify"]

__version__ = "0.1.0"
