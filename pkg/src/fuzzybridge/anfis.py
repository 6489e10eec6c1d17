"""Hybrid trainer for rule models: exact least squares on the consequents,
full-batch gradient descent on the Gaussian antecedents.

Each epoch runs the two passes in order: consequents are refit by a linear
solve with the antecedents held fixed, then the antecedent centers and
widths take one gradient step with the consequents held fixed. The loss for
the gradient pass is the sum of squared residuals of the weighted-average
output.
"""

import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import Dataset
from .membership import WIDTH_FLOOR, Gaussian
from .model import (
    FIRING_EPS,
    WEIGHTED_AVERAGE,
    Affine,
    Antecedent,
    Clause,
    Rule,
    TSKModel,
    consequent_matrix,
    mse,
    normalize_firings,
)

GRID_RULE_CAP = 10_000


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.01
    ridge_jitter: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.ridge_jitter < 0:
            raise ValueError("ridge_jitter must be >= 0")


@dataclass
class TrainHistory:
    """Per-epoch (train_mse, optional val_mse) records."""

    records: list = field(default_factory=list)

    def append(self, epoch: int, train_mse: float, val_mse=None):
        self.records.append(
            {"epoch": epoch, "train_mse": float(train_mse)}
            | ({"val_mse": float(val_mse)} if val_mse is not None else {})
        )

    def __len__(self):
        return len(self.records)

    def final_train_mse(self):
        return self.records[-1]["train_mse"] if self.records else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec) + "\n" for rec in self.records)


def grid_init(input_dim, mfs_per_input, ranges, dataset=None, rule_cap=GRID_RULE_CAP):
    """Grid-partition rule base: every conjunction of per-feature Gaussians.

    Centers are equally spaced over each feature range with width spacing/2;
    the rule count is mfs_per_input**input_dim and is refused above rule_cap.
    Consequents start affine with zero slopes; the intercept is the target
    mean when a dataset is supplied.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if mfs_per_input < 1:
        raise ValueError("mfs_per_input must be >= 1")
    ranges = list(ranges)
    if len(ranges) != input_dim:
        raise ValueError(f"expected {input_dim} ranges, got {len(ranges)}")
    n_rules = mfs_per_input**input_dim
    if n_rules > rule_cap:
        raise ValueError(
            f"grid of {mfs_per_input}^{input_dim} = {n_rules} rules exceeds the "
            f"cap of {rule_cap}; use clustering or a tree initializer instead"
        )
    from .membership import gaussian_grid

    per_feature = [gaussian_grid(lo, hi, mfs_per_input) for lo, hi in ranges]
    intercept = float(np.mean(dataset.targets)) if dataset is not None else 0.0
    zero = (0.0,) * input_dim
    rules = []
    for combo in itertools.product(*(range(mfs_per_input) for _ in range(input_dim))):
        clauses = tuple(
            Clause(i, per_feature[i][combo[i]]) for i in range(input_dim)
        )
        rules.append(Rule(Antecedent(clauses), Affine(zero, intercept)))
    return TSKModel(input_dim, tuple(rules), WEIGHTED_AVERAGE)


def _lloyd(points: np.ndarray, k: int, seed: int, max_iter=50, tol=1e-8):
    """K-means with farthest-point seeding; deterministic under the seed."""
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    dist = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        centers[j] = points[int(np.argmax(dist))]
        dist = np.minimum(dist, np.sum((points - centers[j]) ** 2, axis=1))
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        moved = 0.0
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new = members.mean(axis=0)
                moved = max(moved, float(np.max(np.abs(new - centers[j]))))
                centers[j] = new
        if moved < tol:
            break
    return centers, labels


def cluster_init(dataset: Dataset, n_rules: int, seed: int = 0) -> TSKModel:
    """One rule per input-space cluster: centers at the centroid, widths at
    the per-feature within-cluster standard deviation (clamped)."""
    n = dataset.n_examples
    if n < 1:
        raise ValueError("empty dataset")
    if not 1 <= n_rules <= n:
        raise ValueError(f"need 1 <= n_rules <= {n}, got {n_rules}")
    centers, labels = _lloyd(dataset.inputs, n_rules, seed)
    d = dataset.input_dim
    zero = (0.0,) * d
    rules = []
    for k in range(n_rules):
        members = labels == k
        widths = (
            dataset.inputs[members].std(axis=0) if members.any() else np.zeros(d)
        )
        widths = np.maximum(widths, WIDTH_FLOOR)
        clauses = tuple(
            Clause(i, Gaussian(float(centers[k, i]), float(widths[i]))) for i in range(d)
        )
        intercept = (
            float(dataset.targets[members].mean())
            if members.any()
            else float(dataset.targets.mean())
        )
        rules.append(Rule(Antecedent(clauses), Affine(zero, intercept)))
    return TSKModel(d, tuple(rules), WEIGHTED_AVERAGE)


def _design_matrix(model: TSKModel, X: np.ndarray) -> np.ndarray:
    """N x K(d+1) block design: block k holds the normalized firing times
    [x, 1] so the solve covers every slope and intercept jointly."""
    weights = normalize_firings(np.exp(kernels.batch_log_firings(model.packed(), X)))
    n, d = X.shape
    k = model.n_rules
    phi = np.empty((n, k * (d + 1)))
    for j in range(k):
        phi[:, j * (d + 1) : j * (d + 1) + d] = weights[:, j : j + 1] * X
        phi[:, j * (d + 1) + d] = weights[:, j]
    return phi


def lse_consequents(model: TSKModel, dataset: Dataset, ridge_jitter: float = 1e-8) -> TSKModel:
    """Globally optimal affine consequents for fixed antecedents.

    Solved by SVD least squares on the block design; when the design is
    rank-deficient the solve is repeated with ridge_jitter on the
    normal-equations diagonal (as an augmented system, for stability).
    """
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    if model.aggregation != WEIGHTED_AVERAGE:
        raise ValueError("consequent least squares is defined for weighted-average models")
    for k, rule in enumerate(model.rules):
        if not isinstance(rule.consequent, Affine):
            raise ValueError(
                f"rule {k} has a constant consequent; convert with as_affine first"
            )
    X, y = dataset.inputs, dataset.targets
    phi = _design_matrix(model, X)
    n_params = phi.shape[1]
    theta, _, rank, _ = np.linalg.lstsq(phi, y, rcond=None)
    if rank < n_params and ridge_jitter > 0.0:
        aug = np.vstack([phi, math.sqrt(ridge_jitter) * np.eye(n_params)])
        rhs = np.concatenate([y, np.zeros(n_params)])
        theta, _, _, _ = np.linalg.lstsq(aug, rhs, rcond=None)
    d = model.input_dim
    rules = []
    for k, rule in enumerate(model.rules):
        block = theta[k * (d + 1) : (k + 1) * (d + 1)]
        rules.append(replace(rule, consequent=Affine(tuple(block[:d]), float(block[d]))))
    return replace(model, rules=tuple(rules))


def _gaussian_clause_index(model: TSKModel):
    """(rule, clause) positions of every Gaussian antecedent parameter pair."""
    index = []
    for k, rule in enumerate(model.rules):
        for j, clause in enumerate(rule.antecedent.clauses):
            if not isinstance(clause.mf, Gaussian):
                raise ValueError(
                    f"rule {k} clause {j}: antecedent gradients support Gaussian "
                    f"membership functions only (got {clause.mf.kind})"
                )
            index.append((k, j))
    return index


def antecedent_parameters(model: TSKModel) -> np.ndarray:
    """Flatten every Gaussian (center, width) pair, rule-major."""
    out = []
    for k, j in _gaussian_clause_index(model):
        mf = model.rules[k].antecedent.clauses[j].mf
        out.extend((mf.center, mf.width))
    return np.asarray(out)


def with_antecedent_parameters(model: TSKModel, params: np.ndarray) -> TSKModel:
    """Rebuild the model with a flattened (center, width) vector."""
    index = _gaussian_clause_index(model)
    if len(params) != 2 * len(index):
        raise ValueError(f"expected {2 * len(index)} parameters, got {len(params)}")
    rules = [list(r.antecedent.clauses) for r in model.rules]
    for pos, (k, j) in enumerate(index):
        clause = rules[k][j]
        rules[k][j] = replace(
            clause, mf=Gaussian(float(params[2 * pos]), float(params[2 * pos + 1]))
        )
    new_rules = tuple(
        replace(
            rule,
            antecedent=replace(rule.antecedent, clauses=tuple(rules[k])),
        )
        for k, rule in enumerate(model.rules)
    )
    return replace(model, rules=new_rules)


def antecedent_gradients(model: TSKModel, dataset: Dataset) -> np.ndarray:
    """Gradient of the summed squared error w.r.t. every Gaussian center and
    width, flattened in the same order as antecedent_parameters.

    Inputs whose total firing mass underflows contribute nothing: the output
    is constant (uniform fallback) there.
    """
    if model.aggregation != WEIGHTED_AVERAGE:
        raise ValueError("antecedent gradients are defined for weighted-average models")
    index = _gaussian_clause_index(model)
    X, y = dataset.inputs, dataset.targets
    firings = np.exp(kernels.batch_log_firings(model.packed(), X))
    weights = normalize_firings(firings)
    live = firings.sum(axis=1) >= FIRING_EPS
    slopes, intercepts = consequent_matrix(model.rules, model.input_dim)
    values = X @ slopes.T + intercepts
    predictions = (weights * values).sum(axis=1)
    residuals = y - predictions
    # d(output)/d(log f_k) = w_k (y_k - output); chain through the clause
    common = (-2.0 * residuals * live)[:, None] * weights * (values - predictions[:, None])
    grad = np.empty(2 * len(index))
    for pos, (k, j) in enumerate(index):
        clause = model.rules[k].antecedent.clauses[j]
        mf = clause.mf
        dx = X[:, clause.feature] - mf.center
        var = mf.width * mf.width
        grad[2 * pos] = float(np.dot(common[:, k], dx) / var)
        grad[2 * pos + 1] = float(np.dot(common[:, k], dx * dx) / (var * mf.width))
    return grad


def hybrid_train(model: TSKModel, dataset: Dataset, config: TrainConfig, val_dataset=None):
    """Alternate the consequent solve and one antecedent gradient step per
    epoch; widths are clamped after every step. Returns (model, history)."""
    history = TrainHistory()
    current = model
    for epoch in range(config.epochs):
        current = lse_consequents(current, dataset, config.ridge_jitter)
        params = antecedent_parameters(current)
        grad = antecedent_gradients(current, dataset)
        params = params - config.learning_rate * grad
        params[1::2] = np.maximum(params[1::2], WIDTH_FLOOR)
        current = with_antecedent_parameters(current, params)
        val = (
            mse(current.batch_predict(val_dataset), val_dataset.targets)
            if val_dataset is not None
            else None
        )
        history.append(epoch, mse(current.batch_predict(dataset), dataset.targets), val)
    return current, history


def constants_to_affine(model: TSKModel) -> TSKModel:
    """Upgrade constant consequents to zero-slope affine ones."""
    rules = tuple(
        replace(r, consequent=r.consequent.as_affine(model.input_dim)) for r in model.rules
    )
    return replace(model, rules=rules)
