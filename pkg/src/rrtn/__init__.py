"""Redundancy-reduction twin network training at desk scale."""

from .tensor import Tensor, backward, finite_diff_check

__all__ = ["Tensor", "backward", "finite_diff_check"]
__version__ = "0.1.0"
