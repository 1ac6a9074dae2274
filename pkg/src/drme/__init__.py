"""Distributionally robust memory evolution for task-free continual learning."""

from ._core import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
