"""Mixture of experts: softmax gating over affine experts.

Three training losses are supported. The competitive loss weights each
expert's own squared residual by its gate weight, pushing experts to claim
regions; the coupled loss penalizes the blended output, pushing experts to
cooperate; the hybrid loss is coupled + lambda * competitive.

A quadratic-diagonal gate value -sum_i (x_i - c_i)^2 / (2 s_i^2) is exactly
the log firing level of a full Gaussian antecedent, which is what makes the
rule-model conversions exact.
"""

from dataclasses import dataclass

import numpy as np

from .anfis import TrainConfig, TrainHistory
from .data import Dataset
from .errors import ConstraintError
from .membership import WIDTH_FLOOR, Gaussian
from .model import (
    WEIGHTED_AVERAGE,
    Affine,
    Antecedent,
    Clause,
    Rule,
    TSKModel,
    mse,
)

LOSS_KINDS = ("coupled", "competitive", "hybrid")


@dataclass(frozen=True)
class QuadraticGate:
    """Gate value -sum_i (x_i - c_i)^2 / (2 widths_i^2)."""

    centers: tuple
    widths: tuple
    kind = "quadratic_diag"

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if len(self.centers) != len(self.widths):
            raise ValueError("need one width per center")
        if any(not w > 0.0 for w in self.widths):
            raise ValueError("gate widths must be > 0")

    def value(self, x) -> float:
        acc = 0.0
        for xi, c, w in zip(x, self.centers, self.widths):
            d = xi - c
            acc -= (d * d) / (2.0 * (w * w))
        return acc

    def batch_values(self, X) -> np.ndarray:
        c = np.asarray(self.centers)
        denom = 2.0 * (np.asarray(self.widths) ** 2)
        return -((X - c) ** 2 / denom).sum(axis=1)


@dataclass(frozen=True)
class AffineGate:
    """Gate value weights . x + bias."""

    weights: tuple
    bias: float
    kind = "affine"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def value(self, x) -> float:
        return float(np.dot(self.weights, x)) + self.bias

    def batch_values(self, X) -> np.ndarray:
        return X @ np.asarray(self.weights) + self.bias


@dataclass(frozen=True)
class MoEModel:
    input_dim: int
    experts: tuple  # Affine consequents
    gates: tuple  # QuadraticGate | AffineGate

    def __post_init__(self):
        object.__setattr__(self, "experts", tuple(self.experts))
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.experts) < 1:
            raise ValueError("need at least one expert")
        if len(self.experts) != len(self.gates):
            raise ValueError("expert and gate counts must match")
        for k, expert in enumerate(self.experts):
            if not isinstance(expert, Affine):
                raise ValueError(f"expert {k} must be affine")
            if len(expert.slopes) != self.input_dim:
                raise ValueError(f"expert {k}: slope length != input_dim")
        for k, gate in enumerate(self.gates):
            size = len(gate.centers) if isinstance(gate, QuadraticGate) else len(gate.weights)
            if size != self.input_dim:
                raise ValueError(f"gate {k}: parameter length != input_dim")

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    def _as_matrix(self, inputs) -> np.ndarray:
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected (N, {self.input_dim}) inputs, got {X.shape}")
        return X

    def batch_gate_values(self, inputs) -> np.ndarray:
        X = self._as_matrix(inputs)
        return np.column_stack([g.batch_values(X) for g in self.gates])

    def batch_gate_weights(self, inputs) -> np.ndarray:
        return _softmax_rows(self.batch_gate_values(inputs))

    def batch_expert_values(self, inputs) -> np.ndarray:
        X = self._as_matrix(inputs)
        slopes = np.asarray([e.slopes for e in self.experts])
        intercepts = np.asarray([e.intercept for e in self.experts])
        return X @ slopes.T + intercepts

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        return (self.batch_gate_weights(inputs) * self.batch_expert_values(inputs)).sum(axis=1)

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


def _softmax_rows(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def gate_weights(model: MoEModel, x) -> np.ndarray:
    """Softmax of the gate values at x (max-subtracted for overflow safety)."""
    return model.batch_gate_weights(np.asarray(x, dtype=float)[None, :])[0]


def moe_predict(model: MoEModel, x) -> float:
    return model.predict(x)


def loss_competitive(model: MoEModel, dataset: Dataset) -> float:
    """sum_n sum_k w_k(x_n) (y_n - expert_k(x_n))^2."""
    W = model.batch_gate_weights(dataset.inputs)
    V = model.batch_expert_values(dataset.inputs)
    R = dataset.targets[:, None] - V
    return float((W * R * R).sum())


def loss_coupled(model: MoEModel, dataset: Dataset) -> float:
    """sum_n (y_n - blended prediction)^2."""
    r = dataset.targets - model.batch_predict(dataset.inputs)
    return float((r * r).sum())


def loss_hybrid(model: MoEModel, dataset: Dataset, lam: float) -> float:
    """Coupled plus lambda times competitive; lambda >= 0."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return loss_coupled(model, dataset) + lam * loss_competitive(model, dataset)


def _loss_value(model, dataset, loss_kind, lam):
    if loss_kind == "coupled":
        return loss_coupled(model, dataset)
    if loss_kind == "competitive":
        return loss_competitive(model, dataset)
    if loss_kind == "hybrid":
        return loss_hybrid(model, dataset, lam)
    raise ValueError(f"unknown loss {loss_kind!r}; choose from {LOSS_KINDS}")


def parameter_vector(model: MoEModel) -> np.ndarray:
    """All trainable parameters: expert (slopes, intercept) blocks first,
    then gate blocks (centers+widths or weights+bias), index order."""
    parts = []
    for e in model.experts:
        parts.extend(e.slopes)
        parts.append(e.intercept)
    for g in model.gates:
        if isinstance(g, QuadraticGate):
            parts.extend(g.centers)
            parts.extend(g.widths)
        else:
            parts.extend(g.weights)
            parts.append(g.bias)
    return np.asarray(parts, dtype=float)


def with_parameters(model: MoEModel, params: np.ndarray) -> MoEModel:
    d = model.input_dim
    pos = 0
    experts = []
    for _ in model.experts:
        experts.append(Affine(tuple(params[pos : pos + d]), float(params[pos + d])))
        pos += d + 1
    gates = []
    for g in model.gates:
        if isinstance(g, QuadraticGate):
            gates.append(
                QuadraticGate(tuple(params[pos : pos + d]), tuple(params[pos + d : pos + 2 * d]))
            )
            pos += 2 * d
        else:
            gates.append(AffineGate(tuple(params[pos : pos + d]), float(params[pos + d])))
            pos += d + 1
    if pos != len(params):
        raise ValueError(f"expected {pos} parameters, got {len(params)}")
    return MoEModel(d, tuple(experts), tuple(gates))


def loss_gradients(model: MoEModel, dataset: Dataset, loss_kind: str, lam: float = 0.0) -> np.ndarray:
    """Analytic gradient of the chosen loss, aligned with parameter_vector.

    Gate-weight dependence is differentiated in full (the competitive loss
    gradient flows through the softmax weights as well as the residuals).
    """
    if loss_kind == "hybrid" and lam < 0:
        raise ValueError("lambda must be >= 0")
    X, y = dataset.inputs, dataset.targets
    W = model.batch_gate_weights(X)  # (N, K)
    V = model.batch_expert_values(X)  # (N, K)
    pred = (W * V).sum(axis=1)
    resid = y - pred

    # dE/dV[n,k] and dE/d(gate value)[n,k] for each loss component
    if loss_kind == "coupled":
        dV = -2.0 * resid[:, None] * W
        dG = -2.0 * resid[:, None] * W * (V - pred[:, None])
    elif loss_kind == "competitive":
        Rk = y[:, None] - V
        E = Rk * Rk
        dV = -2.0 * W * Rk
        dG = W * (E - (W * E).sum(axis=1)[:, None])
    else:
        Rk = y[:, None] - V
        E = Rk * Rk
        dV = -2.0 * resid[:, None] * W + lam * (-2.0 * W * Rk)
        dG = -2.0 * resid[:, None] * W * (V - pred[:, None]) + lam * W * (
            E - (W * E).sum(axis=1)[:, None]
        )

    parts = []
    for k in range(model.n_experts):
        parts.extend(X.T @ dV[:, k])
        parts.append(dV[:, k].sum())
    for k, g in enumerate(model.gates):
        if isinstance(g, QuadraticGate):
            c = np.asarray(g.centers)
            w = np.asarray(g.widths)
            D = X - c
            # d(gate)/d(center_i) = (x_i - c_i) / w_i^2
            parts.extend((dG[:, k : k + 1] * D / (w * w)).sum(axis=0))
            # d(gate)/d(width_i) = (x_i - c_i)^2 / w_i^3
            parts.extend((dG[:, k : k + 1] * D * D / (w * w * w)).sum(axis=0))
        else:
            parts.extend(X.T @ dG[:, k])
            parts.append(dG[:, k].sum())
    return np.asarray(parts, dtype=float)


def train_moe(model: MoEModel, dataset: Dataset, loss_kind: str, lam: float, config: TrainConfig,
              val_dataset=None):
    """Full-batch gradient descent on the chosen loss; experts and gates are
    updated jointly each step and positive gate widths are kept clamped.
    Returns (model, history) with per-epoch prediction MSE."""
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss {loss_kind!r}; choose from {LOSS_KINDS}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    history = TrainHistory()
    current = model
    for epoch in range(config.epochs):
        params = parameter_vector(current)
        grad = loss_gradients(current, dataset, loss_kind, lam)
        params = params - config.learning_rate * grad
        current = with_parameters(current, _clamp_gate_widths(current, params))
        val = (
            mse(current.batch_predict(val_dataset), val_dataset.targets)
            if val_dataset is not None
            else None
        )
        history.append(epoch, mse(current.batch_predict(dataset), dataset.targets), val)
    return current, history


def _clamp_gate_widths(model: MoEModel, params: np.ndarray) -> np.ndarray:
    d = model.input_dim
    pos = model.n_experts * (d + 1)
    out = params.copy()
    for g in model.gates:
        if isinstance(g, QuadraticGate):
            out[pos + d : pos + 2 * d] = np.maximum(out[pos + d : pos + 2 * d], WIDTH_FLOOR)
            pos += 2 * d
        else:
            pos += d + 1
    return out


def expert_usage_entropy(model: MoEModel, dataset: Dataset) -> float:
    """Natural-log entropy of the dataset-averaged gate weights."""
    p = model.batch_gate_weights(dataset.inputs).mean(axis=0)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def tsk_to_moe(model: TSKModel) -> MoEModel:
    """Exact mapping for weighted-average models with full Gaussian
    antecedents and affine consequents: each rule becomes one expert and one
    quadratic gate carrying the same centers and widths."""
    if model.aggregation != WEIGHTED_AVERAGE:
        raise ConstraintError("only weighted-average models map onto a mixture of experts")
    experts, gates = [], []
    for k, rule in enumerate(model.rules):
        if not isinstance(rule.consequent, Affine):
            raise ConstraintError(f"rule {k}: consequent must be affine (expert form)")
        feats = sorted(c.feature for c in rule.antecedent.clauses)
        if feats != list(range(model.input_dim)):
            raise ConstraintError(
                f"rule {k}: antecedent must cover every input exactly once "
                f"(got features {feats})"
            )
        by_feature = {c.feature: c.mf for c in rule.antecedent.clauses}
        centers, widths = [], []
        for i in range(model.input_dim):
            mf = by_feature[i]
            if not isinstance(mf, Gaussian):
                raise ConstraintError(
                    f"rule {k}: membership function on feature {i} must be Gaussian "
                    f"(got {mf.kind})"
                )
            centers.append(mf.center)
            widths.append(mf.width)
        experts.append(rule.consequent)
        gates.append(QuadraticGate(tuple(centers), tuple(widths)))
    return MoEModel(model.input_dim, tuple(experts), tuple(gates))


def moe_to_tsk(model: MoEModel) -> TSKModel:
    """Inverse mapping; every gate must be quadratic-diagonal (an affine gate
    has no membership-function image)."""
    rules = []
    for k, (expert, gate) in enumerate(zip(model.experts, model.gates)):
        if not isinstance(gate, QuadraticGate):
            raise ConstraintError(
                f"gate {k} is affine; only quadratic-diagonal gates correspond "
                f"to Gaussian rule antecedents"
            )
        clauses = tuple(
            Clause(i, Gaussian(c, w)) for i, (c, w) in enumerate(zip(gate.centers, gate.widths))
        )
        rules.append(Rule(Antecedent(clauses), expert))
    return TSKModel(model.input_dim, tuple(rules), WEIGHTED_AVERAGE)
