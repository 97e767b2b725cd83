"""Solver-portfolio toolkit for finite-domain CSP.

Per-instance solver selection with k-nearest neighbors over syntactic
features, PAR10 scoring, reference baselines, and a short-training
workflow that prepares, trains and dispatches on the same corpus.
"""

__version__ = "0.1.0"

from .errors import DataError

__all__ = ["DataError", "__version__"]
