"""Rule-based regression core: antecedents, consequents, weighted aggregation.

A model holds K rules over d inputs. Each rule's firing level at x is the
product of its clause membership grades (empty clause list fires at 1).
The model output is either the firing-weighted average of the rule
consequents or their raw firing-weighted sum.

Models are immutable after construction; training code builds new models.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import Dataset
from .membership import Gaussian, MembershipFunction

#: below this total firing mass the weighted average is undefined; the
#: normalized firings fall back to the uniform vector 1/K
FIRING_EPS = 1e-300

WEIGHTED_AVERAGE = "weighted_average"
WEIGHTED_SUM = "weighted_sum"
AGGREGATIONS = (WEIGHTED_AVERAGE, WEIGHTED_SUM)


@dataclass(frozen=True)
class Clause:
    """One antecedent proposition: feature ``feature`` is ``mf``."""

    feature: int
    mf: MembershipFunction

    def __post_init__(self):
        if self.feature < 0:
            raise ValueError(f"feature index must be >= 0, got {self.feature}")


@dataclass(frozen=True)
class Antecedent:
    """Conjunction of clauses (product t-norm). May cover a feature subset.

    Distinct features per antecedent is the default contract; rules
    extracted from tree paths may test one feature repeatedly and set
    ``repeated_ok``.
    """

    clauses: tuple = ()
    repeated_ok: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        feats = [c.feature for c in self.clauses]
        if not self.repeated_ok and len(set(feats)) != len(feats):
            raise ValueError("antecedent tests a feature more than once")

    @property
    def features(self) -> tuple:
        return tuple(c.feature for c in self.clauses)

    def log_firing(self, x) -> float:
        return sum(c.mf.log_grade(x[c.feature]) for c in self.clauses)

    def firing(self, x) -> float:
        return math.exp(self.log_firing(x))


@dataclass(frozen=True)
class Constant:
    """Constant consequent y = value."""

    value: float
    kind = "constant"

    def evaluate(self, x) -> float:
        return self.value

    def as_affine(self, input_dim: int) -> "Affine":
        return Affine((0.0,) * input_dim, self.value)


@dataclass(frozen=True)
class Affine:
    """Affine consequent y = slopes . x + intercept."""

    slopes: tuple
    intercept: float
    kind = "affine"

    def __post_init__(self):
        object.__setattr__(self, "slopes", tuple(float(s) for s in self.slopes))

    def evaluate(self, x) -> float:
        return float(np.dot(self.slopes, np.asarray(x, dtype=float))) + self.intercept

    def as_affine(self, input_dim: int) -> "Affine":
        if len(self.slopes) != input_dim:
            raise ValueError("slope length does not match input dimension")
        return self


@dataclass(frozen=True)
class Rule:
    antecedent: Antecedent
    consequent: object  # Constant | Affine


def consequent_matrix(rules, input_dim: int):
    """Stack rule consequents into a (K, d) slope matrix and (K,) intercepts."""
    slopes = np.zeros((len(rules), input_dim))
    intercepts = np.zeros(len(rules))
    for k, rule in enumerate(rules):
        c = rule.consequent
        if isinstance(c, Affine):
            slopes[k] = c.slopes
            intercepts[k] = c.intercept
        elif isinstance(c, Constant):
            intercepts[k] = c.value
        else:
            raise TypeError(f"unsupported consequent {type(c).__name__}")
    return slopes, intercepts


def normalize_firings(firings: np.ndarray) -> np.ndarray:
    """Row-normalize raw firing levels; rows below FIRING_EPS become uniform."""
    firings = np.atleast_2d(firings)
    totals = firings.sum(axis=1)
    ok = totals >= FIRING_EPS
    out = np.empty_like(firings)
    out[ok] = firings[ok] / totals[ok, None]
    out[~ok] = 1.0 / firings.shape[1]
    return out


@dataclass(frozen=True)
class TSKModel:
    """K rules over d inputs plus an aggregation mode."""

    input_dim: int
    rules: tuple
    aggregation: str = WEIGHTED_AVERAGE

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.rules) < 1:
            raise ValueError("a model needs at least one rule")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        for k, rule in enumerate(self.rules):
            for clause in rule.antecedent.clauses:
                if clause.feature >= self.input_dim:
                    raise ValueError(
                        f"rule {k}: clause feature {clause.feature} out of range "
                        f"for input_dim {self.input_dim}"
                    )
            if isinstance(rule.consequent, Affine) and len(rule.consequent.slopes) != self.input_dim:
                raise ValueError(f"rule {k}: affine slope length != input_dim")

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def _as_matrix(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.input_dim:
            raise ValueError(
                f"input has shape {np.shape(x)}, expected (..., {self.input_dim})"
            )
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("input contains non-finite entries")
        return arr

    def packed(self) -> kernels.PackedAntecedents:
        return kernels.pack_antecedents(r.antecedent for r in self.rules)

    def batch_firing_levels(self, inputs) -> np.ndarray:
        X = self._as_matrix(inputs)
        return np.exp(kernels.batch_log_firings(self.packed(), X))

    def firing_levels(self, x) -> np.ndarray:
        return self.batch_firing_levels(x)[0]

    def normalized_firings(self, x) -> np.ndarray:
        return normalize_firings(self.batch_firing_levels(x))[0]

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = self._as_matrix(inputs)
        firings = np.exp(kernels.batch_log_firings(self.packed(), X))
        slopes, intercepts = consequent_matrix(self.rules, self.input_dim)
        values = X @ slopes.T + intercepts
        if self.aggregation == WEIGHTED_AVERAGE:
            weights = normalize_firings(firings)
        else:
            weights = firings
        return (weights * values).sum(axis=1)

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


def firing_level(rule: Rule, x) -> float:
    """Product of the rule's clause grades at x; empty antecedent gives 1."""
    return rule.antecedent.firing(np.asarray(x, dtype=float))


def mse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise ValueError(
            f"length mismatch: {predictions.shape} predictions vs {targets.shape} targets"
        )
    residuals = predictions - targets
    return float(np.mean(residuals * residuals))


def batch_predict(model: TSKModel, dataset) -> np.ndarray:
    return model.batch_predict(dataset)
