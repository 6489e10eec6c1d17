"""fuzzybridge: a TSK fuzzy regression toolkit with exact converters.

One rule-based core, four functionally equivalent outer forms (normalized
RBF networks, mixtures of experts, fuzzified regression trees, stacking
ensembles), trainers for each, and verification suites that exercise the
equivalences numerically.
"""

from .data import DataSpec, Dataset, generate, load_csv, save_csv, split, standardize
from .membership import Gaussian, MembershipFunction, SigmoidDown, SigmoidUp
from .model import (
    WEIGHTED_AVERAGE,
    WEIGHTED_SUM,
    Affine,
    Antecedent,
    Clause,
    Constant,
    Rule,
    TSKModel,
    firing_level,
    mse,
)

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "Antecedent",
    "Clause",
    "Constant",
    "DataSpec",
    "Dataset",
    "Gaussian",
    "MembershipFunction",
    "Rule",
    "SigmoidDown",
    "SigmoidUp",
    "TSKModel",
    "WEIGHTED_AVERAGE",
    "WEIGHTED_SUM",
    "firing_level",
    "generate",
    "load_csv",
    "mse",
    "save_csv",
    "split",
    "standardize",
    "__version__",
]
