"""Radial-basis-function networks and exact conversion to/from rule models.

A receptive unit responds with exp(-sum_i (x_i - c_i)^2 / v_i) where v_i is
the unit's squared width (one shared value in the standard network,
per-feature values in the generalized one). Rule models evaluate Gaussian
clauses as exp(-(x-c)^2 / (2 w^2)), so the two parameterizations differ by
an exact factor of 2 in the denominator: v = 2 w^2.

Storing the squared width is deliberate: doubling and halving are exact in
binary floating point and sqrt(w*w) recovers w bit for bit, so conversion
round-trips are parameter-identical, not merely close.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .data import Dataset
from .errors import ConstraintError
from .membership import Gaussian
from .model import (
    WEIGHTED_AVERAGE,
    WEIGHTED_SUM,
    Affine,
    Antecedent,
    Clause,
    Constant,
    Rule,
    TSKModel,
    consequent_matrix,
    normalize_firings,
)


@dataclass(frozen=True)
class RBFUnit:
    """One receptive field: Gaussian response over a feature subset.

    width_sq is the squared width v of the response denominator, either a
    single shared value or one value per connected feature.
    """

    features: tuple
    centers: tuple
    width_sq: object  # float (shared) or tuple (per feature)
    output: object  # Constant | Affine

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(f) for f in self.features))
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if len(set(self.features)) != len(self.features):
            raise ValueError("unit features must be distinct")
        if len(self.centers) != len(self.features):
            raise ValueError("need one center per connected feature")
        if isinstance(self.width_sq, (int, float)):
            object.__setattr__(self, "width_sq", float(self.width_sq))
            if not self.width_sq > 0.0:
                raise ValueError("width_sq must be > 0")
        else:
            ws = tuple(float(v) for v in self.width_sq)
            if len(ws) != len(self.features):
                raise ValueError("need one width per connected feature")
            if any(not v > 0.0 for v in ws):
                raise ValueError("width_sq entries must be > 0")
            object.__setattr__(self, "width_sq", ws)

    @property
    def shared_width(self) -> bool:
        return isinstance(self.width_sq, float)

    def width_sq_per_feature(self) -> tuple:
        if self.shared_width:
            return (self.width_sq,) * len(self.features)
        return self.width_sq

    def log_response(self, x) -> float:
        x = np.asarray(x, dtype=float)
        acc = 0.0
        for f, c, v in zip(self.features, self.centers, self.width_sq_per_feature()):
            d = x[f] - c
            acc -= (d * d) / v
        return acc

    def response(self, x) -> float:
        return float(np.exp(self.log_response(x)))


@dataclass(frozen=True)
class RBFNModel:
    input_dim: int
    units: tuple
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.units) < 1:
            raise ValueError("a network needs at least one unit")
        for k, unit in enumerate(self.units):
            if any(f >= self.input_dim for f in unit.features):
                raise ValueError(f"unit {k}: feature index out of range")
            if isinstance(unit.output, Affine) and len(unit.output.slopes) != self.input_dim:
                raise ValueError(f"unit {k}: affine output slope length != input_dim")

    @property
    def n_units(self) -> int:
        return len(self.units)

    def packed(self) -> kernels.PackedAntecedents:
        # a unit's response factors into per-feature Gaussians whose grade
        # denominators are the stored squared widths, so the rule kernels
        # apply unchanged
        rule_ptr = [0]
        feature, kind, p0, p1 = [], [], [], []
        for unit in self.units:
            for f, c, v in zip(unit.features, unit.centers, unit.width_sq_per_feature()):
                feature.append(f)
                kind.append(kernels.GAUSSIAN)
                p0.append(c)
                p1.append(v)
            rule_ptr.append(len(feature))
        return kernels.PackedAntecedents(
            n_rules=len(self.units),
            rule_ptr=np.asarray(rule_ptr, dtype=np.int32),
            feature=np.asarray(feature, dtype=np.int32),
            kind=np.asarray(kind, dtype=np.int32),
            p0=np.asarray(p0, dtype=np.float64),
            p1=np.asarray(p1, dtype=np.float64),
        )

    def batch_responses(self, inputs) -> np.ndarray:
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected (N, {self.input_dim}) inputs, got {X.shape}")
        return np.exp(kernels.batch_log_firings(self.packed(), X))

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = np.asarray(inputs, dtype=np.float64)
        responses = self.batch_responses(X)
        fake_rules = tuple(Rule(Antecedent(), u.output) for u in self.units)
        slopes, intercepts = consequent_matrix(fake_rules, self.input_dim)
        values = X @ slopes.T + intercepts
        weights = normalize_firings(responses) if self.normalized else responses
        return (weights * values).sum(axis=1)

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


def unit_response(unit: RBFUnit, x) -> float:
    return unit.response(x)


def rbfn_predict(model: RBFNModel, x) -> float:
    return model.predict(x)


def tsk_to_rbfn(model: TSKModel) -> RBFNModel:
    """Standard-network conversion; enforces the strict structural constraints.

    Checked per rule: (1) the antecedent covers every input so the rule maps
    onto a full receptive field, (2) the consequent is a constant, (3) the
    membership functions are Gaussians sharing one width. The product
    combination and matching aggregation hold by construction. The shared
    squared width of each unit is 2 w^2.
    """
    units = []
    for k, rule in enumerate(model.rules):
        if not isinstance(rule.consequent, Constant):
            raise ConstraintError(
                f"rule {k}: non-constant consequent violates constraint (2) "
                f"[unit outputs are constants]"
            )
        clauses = rule.antecedent.clauses
        feats = sorted(c.feature for c in clauses)
        if feats != list(range(model.input_dim)):
            raise ConstraintError(
                f"rule {k}: antecedent covers features {feats} instead of all "
                f"{model.input_dim} inputs, so it cannot form a standard "
                f"receptive unit; violates constraint (1) [one full-width unit "
                f"per rule]; use the generalized conversion"
            )
        widths = set()
        for clause in clauses:
            if not isinstance(clause.mf, Gaussian):
                raise ConstraintError(
                    f"rule {k}: non-Gaussian membership function ({clause.mf.kind}) "
                    f"violates constraint (3) [Gaussian functions with the same variance]"
                )
            widths.add(clause.mf.width)
        if len(widths) != 1:
            raise ConstraintError(
                f"rule {k}: widths differ across features; violates constraint (3) "
                f"[Gaussian functions with the same variance]"
            )
        width = widths.pop()
        units.append(
            RBFUnit(
                features=tuple(c.feature for c in clauses),
                centers=tuple(c.mf.center for c in clauses),
                width_sq=2.0 * (width * width),
                output=rule.consequent,
            )
        )
    return RBFNModel(model.input_dim, tuple(units), model.aggregation == WEIGHTED_AVERAGE)


def tsk_to_rbfn_generalized(model: TSKModel) -> RBFNModel:
    """Generalized-network conversion: feature subsets, per-feature widths
    and affine outputs are all carried across unchanged."""
    units = []
    for k, rule in enumerate(model.rules):
        feats = [c.feature for c in rule.antecedent.clauses]
        if len(set(feats)) != len(feats):
            raise ConstraintError(
                f"rule {k}: repeated feature in antecedent has no receptive-unit image"
            )
        gaussians = []
        for clause in rule.antecedent.clauses:
            if not isinstance(clause.mf, Gaussian):
                raise ConstraintError(
                    f"rule {k}: non-Gaussian membership function ({clause.mf.kind}) "
                    f"violates constraint (2) [Gaussian antecedents]"
                )
            gaussians.append(clause)
        units.append(
            RBFUnit(
                features=tuple(c.feature for c in gaussians),
                centers=tuple(c.mf.center for c in gaussians),
                width_sq=tuple(2.0 * (c.mf.width * c.mf.width) for c in gaussians),
                output=rule.consequent,
            )
        )
    return RBFNModel(model.input_dim, tuple(units), model.aggregation == WEIGHTED_AVERAGE)


def rbfn_to_tsk(model: RBFNModel) -> TSKModel:
    """Inverse parameter transport; widths come back as sqrt(v / 2), which is
    exact for units produced by the forward converters."""
    rules = []
    for unit in model.units:
        clauses = tuple(
            Clause(f, Gaussian(c, float(np.sqrt(v / 2.0))))
            for f, c, v in zip(unit.features, unit.centers, unit.width_sq_per_feature())
        )
        rules.append(Rule(Antecedent(clauses), unit.output))
    aggregation = WEIGHTED_AVERAGE if model.normalized else WEIGHTED_SUM
    return TSKModel(model.input_dim, tuple(rules), aggregation)
