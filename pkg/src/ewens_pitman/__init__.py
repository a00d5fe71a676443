"""Ewens-Pitman random partitions: sampling, exact moments, martingales and
small-block estimators of the discount parameter."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
