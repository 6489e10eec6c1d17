"""Stacking ensembles and firing-weighted local rule construction.

Base models are ridge-regularized affine fits on bootstrap resamples. The
combiner is either a least-squares weight vector over the base predictions
(classic stacking) or one affine gate per base whose softmax makes the
blend input-dependent (adaptive stacking; bases stay frozen while the gates
train).

Two rule-construction routines live here as well: grid-cell rules whose
constant consequents are sharpened firing-weighted target averages, and
per-rule weighted least-squares affine fits using raw firing levels as
example weights.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .anfis import TrainConfig
from .data import Dataset
from .errors import DegenerateRuleError
from .model import (
    FIRING_EPS,
    WEIGHTED_AVERAGE,
    Affine,
    Antecedent,
    Clause,
    Constant,
    Rule,
    TSKModel,
    mse,
)
from .moe import AffineGate, _softmax_rows


@dataclass(frozen=True)
class BaseModel:
    """Affine base regressor plus the provenance of its resample."""

    coeffs: tuple
    intercept: float
    seed: int
    ridge: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = np.asarray(inputs, dtype=np.float64)
        return X @ np.asarray(self.coeffs) + self.intercept

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


@dataclass(frozen=True)
class ConstantWeights:
    weights: tuple
    intercept: float
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))


@dataclass(frozen=True)
class AdaptiveGates:
    gates: tuple  # AffineGate per base
    kind = "adaptive"

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))


@dataclass(frozen=True)
class StackModel:
    input_dim: int
    bases: tuple
    combiner: object  # ConstantWeights | AdaptiveGates

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        arity = (
            len(self.combiner.weights)
            if isinstance(self.combiner, ConstantWeights)
            else len(self.combiner.gates)
        )
        if arity != len(self.bases):
            raise ValueError("combiner arity must equal the number of bases")

    def base_predictions(self, inputs) -> np.ndarray:
        return np.column_stack([b.batch_predict(inputs) for b in self.bases])

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = np.asarray(inputs, dtype=np.float64)
        P = self.base_predictions(X)
        if isinstance(self.combiner, ConstantWeights):
            return P @ np.asarray(self.combiner.weights) + self.combiner.intercept
        G = np.column_stack([g.batch_values(X) for g in self.combiner.gates])
        return (_softmax_rows(G) * P).sum(axis=1)

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


def stack_predict(model: StackModel, x) -> float:
    return model.predict(x)


def bootstrap_indices(n: int, seed: int) -> np.ndarray:
    """n draws with replacement from range(n), deterministic under the seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.random.default_rng(seed).integers(0, n, size=n)


def _ridge_affine_fit(X, y, ridge):
    """Affine least squares with an L2 penalty, via the augmented system."""
    n, d = X.shape
    design = np.column_stack([X, np.ones(n)])
    if ridge > 0.0:
        design = np.vstack([design, np.sqrt(ridge) * np.eye(d + 1)])
        y = np.concatenate([y, np.zeros(d + 1)])
    theta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    return theta


def fit_bases(dataset: Dataset, n_bases: int, seed: int, ridge: float = 1e-8) -> list:
    """One ridge affine fit per bootstrap resample; base seeds are drawn from
    the master seed so each base records its own."""
    if n_bases < 1:
        raise ValueError("n_bases must be >= 1")
    if dataset.n_examples < 2:
        raise ValueError("need at least 2 examples to fit bases")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    d = dataset.input_dim
    base_seeds = np.random.default_rng(seed).integers(0, 2**63 - 1, size=n_bases)
    bases = []
    for k in range(n_bases):
        idx = bootstrap_indices(dataset.n_examples, int(base_seeds[k]))
        theta = _ridge_affine_fit(dataset.inputs[idx], dataset.targets[idx], ridge)
        bases.append(BaseModel(tuple(theta[:d]), float(theta[d]), int(base_seeds[k]), ridge))
    return bases


def fit_constant_stack(bases, dataset: Dataset, ridge: float = 1e-8) -> StackModel:
    """Least-squares weights (plus intercept) over the base-prediction
    columns; the small ridge keeps duplicate bases well-posed."""
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    bases = list(bases)
    P = np.column_stack([b.batch_predict(dataset.inputs) for b in bases])
    theta = _ridge_affine_fit(P, dataset.targets, ridge)
    return StackModel(
        dataset.input_dim,
        tuple(bases),
        ConstantWeights(tuple(theta[:-1]), float(theta[-1])),
    )


def _gate_gradients(X, P, y, G):
    """Gradient of sum (y - softmax(G) . P)^2 w.r.t. each gate's (weights, bias)."""
    W = _softmax_rows(G)
    pred = (W * P).sum(axis=1)
    resid = y - pred
    dG = -2.0 * resid[:, None] * W * (P - pred[:, None])
    return [(X.T @ dG[:, k], dG[:, k].sum()) for k in range(P.shape[1])]


def fit_adaptive_stack(bases, dataset: Dataset, config: TrainConfig) -> StackModel:
    """Affine gates trained by full-batch gradient descent on the squared
    error of the softmax blend; bases are frozen. Gates start at zero, i.e.
    the unweighted mean of the bases."""
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    bases = list(bases)
    d = dataset.input_dim
    X, y = dataset.inputs, dataset.targets
    P = np.column_stack([b.batch_predict(X) for b in bases])
    weights = np.zeros((len(bases), d))
    biases = np.zeros(len(bases))
    for _ in range(config.epochs):
        G = X @ weights.T + biases
        grads = _gate_gradients(X, P, y, G)
        for k, (gw, gb) in enumerate(grads):
            weights[k] -= config.learning_rate * gw
            biases[k] -= config.learning_rate * gb
    gates = tuple(AffineGate(tuple(weights[k]), float(biases[k])) for k in range(len(bases)))
    return StackModel(d, tuple(bases), AdaptiveGates(gates))


def nozaki_fit(dataset: Dataset, mf_grid, alpha: float = 1.0):
    """Grid-cell rules with sharpened firing-weighted constant consequents.

    mf_grid is one membership-function list per feature; a rule is created
    for every cell of the cross product. Each consequent is the weighted
    average of the targets with weights (cell firing)^alpha. Cells whose
    total weight underflows fall back to the global target mean and are
    reported in the returned flag list.

    Returns (model, flagged_cell_indices).
    """
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    mf_grid = [list(g) for g in mf_grid]
    if len(mf_grid) != dataset.input_dim:
        raise ValueError(f"expected {dataset.input_dim} membership lists")
    if any(len(g) == 0 for g in mf_grid):
        raise ValueError("every feature needs at least one membership function")

    antecedents = []
    for combo in itertools.product(*(range(len(g)) for g in mf_grid)):
        clauses = tuple(Clause(i, mf_grid[i][combo[i]]) for i in range(dataset.input_dim))
        antecedents.append(Antecedent(clauses))

    packed = kernels.pack_antecedents(antecedents)
    log_f = kernels.batch_log_firings(packed, dataset.inputs)
    weights = np.exp(alpha * log_f)  # (firing)^alpha, computed in log space
    y = dataset.targets
    y_lo, y_hi = float(y.min()), float(y.max())
    global_mean = float(y.mean())
    rules = []
    flagged = []
    for k, ant in enumerate(antecedents):
        total = float(weights[:, k].sum())
        if total < FIRING_EPS:
            value = global_mean
            flagged.append(k)
        else:
            value = float(np.dot(weights[:, k], y) / total)
            # a convex combination in exact arithmetic; keep rounding inside
            value = min(max(value, y_lo), y_hi)
        rules.append(Rule(ant, Constant(value)))
    return TSKModel(dataset.input_dim, tuple(rules), WEIGHTED_AVERAGE), flagged


def local_rule_fit(dataset: Dataset, antecedents) -> TSKModel:
    """Independent weighted least squares per rule, weights = raw firing
    levels; assembles the fitted affine consequents under the given
    antecedents.

    A rule is degenerate when its total firing mass is below d + 2 example
    equivalents or its weighted design loses rank.
    """
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    antecedents = list(antecedents)
    if not antecedents:
        raise ValueError("need at least one antecedent")
    X, y = dataset.inputs, dataset.targets
    d = dataset.input_dim
    packed = kernels.pack_antecedents(antecedents)
    firings = np.exp(kernels.batch_log_firings(packed, X))
    rules = []
    for k, ant in enumerate(antecedents):
        w = firings[:, k]
        mass = float(w.sum())
        if mass < d + 2:
            raise DegenerateRuleError(
                k, f"effective weight mass {mass:.6g} is below the required {d + 2}"
            )
        sw = np.sqrt(w)
        design = np.column_stack([X, np.ones(len(y))]) * sw[:, None]
        theta, _, rank, _ = np.linalg.lstsq(design, y * sw, rcond=None)
        if rank < d + 1:
            raise DegenerateRuleError(
                k, f"weighted design is rank deficient (rank {rank} < {d + 1})"
            )
        rules.append(Rule(ant, Affine(tuple(theta[:d]), float(theta[d]))))
    return TSKModel(d, tuple(rules), WEIGHTED_AVERAGE)


def stack_report(model: StackModel, train: Dataset, test: Dataset | None = None) -> dict:
    """JSON-ready summary of a fitted stack."""
    report = {
        "bases": [
            {
                "seed": b.seed,
                "ridge": b.ridge,
                "coeffs": list(b.coeffs),
                "intercept": b.intercept,
                "train_mse": mse(b.batch_predict(train.inputs), train.targets),
            }
            for b in model.bases
        ],
        "combiner": (
            {
                "kind": "constant",
                "weights": list(model.combiner.weights),
                "intercept": model.combiner.intercept,
            }
            if isinstance(model.combiner, ConstantWeights)
            else {
                "kind": "adaptive",
                "gates": [
                    {"weights": list(g.weights), "bias": g.bias} for g in model.combiner.gates
                ],
            }
        ),
        "stack_train_mse": mse(model.batch_predict(train.inputs), train.targets),
    }
    if test is not None and test.n_examples:
        report["stack_test_mse"] = mse(model.batch_predict(test.inputs), test.targets)
    else:
        report["stack_test_mse"] = None
    return report
