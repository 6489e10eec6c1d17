"""Randomized verification suites behind the CLI `verify` subcommand.

Three suites:

* equivalence - paired evaluation of every converter on random conforming
  models, plus parameter round-trips and softmax shift invariance;
* gradients - analytic gradients against central finite differences;
* oracles - fast prediction paths against slow from-the-definition loops.

The oracle functions here deliberately re-derive everything from model
parameters with plain Python loops; they never call the batched kernels
they are checking.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import anfis, cart, moe, rbfn, stacking
from .data import Dataset
from .membership import Gaussian
from .model import (
    FIRING_EPS,
    WEIGHTED_AVERAGE,
    WEIGHTED_SUM,
    Affine,
    Antecedent,
    Clause,
    Constant,
    Rule,
    TSKModel,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tol

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_deviation": self.max_deviation,
            "tol": self.tol,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# random model fixtures

def random_inputs(rng, n, d, lo=-1.5, hi=1.5) -> np.ndarray:
    return rng.uniform(lo, hi, size=(n, d))


def random_strict_tsk(rng, d, k) -> TSKModel:
    """Constant consequents, full antecedents, one shared width per rule."""
    rules = []
    for _ in range(k):
        width = float(rng.uniform(0.3, 1.5))
        clauses = tuple(
            Clause(i, Gaussian(float(rng.uniform(-1, 1)), width)) for i in range(d)
        )
        rules.append(Rule(Antecedent(clauses), Constant(float(rng.uniform(-2, 2)))))
    aggregation = WEIGHTED_AVERAGE if rng.uniform() < 0.7 else WEIGHTED_SUM
    return TSKModel(d, tuple(rules), aggregation)


def random_generalized_tsk(rng, d, k, partial=True) -> TSKModel:
    """Affine consequents, per-feature widths, optional partial antecedents."""
    rules = []
    for _ in range(k):
        if partial and d > 1 and rng.uniform() < 0.4:
            size = int(rng.integers(0, d))  # may be vacuous
            feats = sorted(rng.choice(d, size=size, replace=False).tolist())
        else:
            feats = list(range(d))
        clauses = tuple(
            Clause(i, Gaussian(float(rng.uniform(-1, 1)), float(rng.uniform(0.3, 1.5))))
            for i in feats
        )
        consequent = Affine(tuple(rng.uniform(-2, 2, size=d)), float(rng.uniform(-2, 2)))
        rules.append(Rule(Antecedent(clauses), consequent))
    aggregation = WEIGHTED_AVERAGE if rng.uniform() < 0.7 else WEIGHTED_SUM
    return TSKModel(d, tuple(rules), aggregation)


def random_conforming_tsk(rng, d, k) -> TSKModel:
    """Weighted-average, full Gaussian antecedents, affine consequents: the
    precondition set of the mixture-of-experts mapping."""
    rules = []
    for _ in range(k):
        clauses = tuple(
            Clause(i, Gaussian(float(rng.uniform(-1, 1)), float(rng.uniform(0.3, 1.5))))
            for i in range(d)
        )
        consequent = Affine(tuple(rng.uniform(-2, 2, size=d)), float(rng.uniform(-2, 2)))
        rules.append(Rule(Antecedent(clauses), consequent))
    return TSKModel(d, tuple(rules), WEIGHTED_AVERAGE)


def random_moe(rng, d, k) -> moe.MoEModel:
    experts = tuple(
        Affine(tuple(rng.uniform(-2, 2, size=d)), float(rng.uniform(-2, 2))) for _ in range(k)
    )
    gates = tuple(
        moe.QuadraticGate(
            tuple(rng.uniform(-1, 1, size=d)), tuple(rng.uniform(0.3, 1.5, size=d))
        )
        for _ in range(k)
    )
    return moe.MoEModel(d, experts, gates)


def random_fuzzy_tree(rng, d, max_leaves) -> cart.FuzzyRegressionTree:
    X = rng.uniform(-1.5, 1.5, size=(60, d))
    y = rng.normal(size=60)
    tree = cart.fit_tree(Dataset(X, y), max_leaves=max_leaves)
    return cart.fuzzify_tree(tree, feature_ranges=[(-1.5, 1.5)] * d)


# ---------------------------------------------------------------------------
# from-the-definition oracles

def oracle_tsk_predict(model: TSKModel, x) -> float:
    firings, values = [], []
    for rule in model.rules:
        f = 1.0
        for clause in rule.antecedent.clauses:
            f *= clause.mf.grade(x[clause.feature])
        firings.append(f)
        values.append(rule.consequent.evaluate(x))
    if model.aggregation == WEIGHTED_SUM:
        return sum(f * v for f, v in zip(firings, values))
    total = sum(firings)
    if total < FIRING_EPS:
        return sum(values) / len(values)
    return sum(f * v for f, v in zip(firings, values)) / total


def oracle_rbfn_predict(model: rbfn.RBFNModel, x) -> float:
    responses, values = [], []
    for unit in model.units:
        s = 0.0
        for f, c, v in zip(unit.features, unit.centers, unit.width_sq_per_feature()):
            s += (x[f] - c) ** 2 / v
        responses.append(math.exp(-s))
        values.append(unit.output.evaluate(x))
    if not model.normalized:
        return sum(r * v for r, v in zip(responses, values))
    total = sum(responses)
    if total < FIRING_EPS:
        return sum(values) / len(values)
    return sum(r * v for r, v in zip(responses, values)) / total


def oracle_moe_predict(model: moe.MoEModel, x) -> float:
    gate_values = [g.value(x) for g in model.gates]
    m = max(gate_values)
    exps = [math.exp(g - m) for g in gate_values]
    total = sum(exps)
    return sum(
        (e / total) * expert.evaluate(x) for e, expert in zip(exps, model.experts)
    )


def oracle_fuzzy_tree_predict(ftree: cart.FuzzyRegressionTree, x) -> float:
    grades_values = []

    def descend(node, grade):
        if isinstance(node, cart.Leaf):
            grades_values.append((grade, node.consequent.evaluate(x)))
            return
        z = node.alpha * (x[node.feature] - node.threshold)
        left_grade = 1.0 / (1.0 + math.exp(z)) if z < 36 else math.exp(-z) / (1.0 + math.exp(-z))
        descend(node.left, grade * left_grade)
        descend(node.right, grade * (1.0 / (1.0 + math.exp(-z)) if z > -36 else math.exp(z) / (1.0 + math.exp(z))))

    descend(ftree.root, 1.0)
    total = sum(g for g, _ in grades_values)
    return sum(g * v for g, v in grades_values) / total


def oracle_stack_predict(model: stacking.StackModel, x) -> float:
    preds = [b.predict(x) for b in model.bases]
    if isinstance(model.combiner, stacking.ConstantWeights):
        return model.combiner.intercept + sum(
            w * p for w, p in zip(model.combiner.weights, preds)
        )
    gate_values = [g.value(x) for g in model.combiner.gates]
    m = max(gate_values)
    exps = [math.exp(g - m) for g in gate_values]
    total = sum(exps)
    return sum((e / total) * p for e, p in zip(exps, preds))


# ---------------------------------------------------------------------------
# finite differences

def finite_difference(fn, params, step=1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector."""
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for i in range(len(params)):
        up = params.copy()
        up[i] += step
        down = params.copy()
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2.0 * step)
    return grad


def gradient_relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


# ---------------------------------------------------------------------------
# suites

def _paired_deviation(predict_a, predict_b, X) -> float:
    return float(np.max(np.abs(predict_a(X) - predict_b(X))))


def equivalence_suite(trials=1000, tol=1e-10, seed=0, models_per_check=8):
    rng = np.random.default_rng(seed)
    results = []

    dev = 0.0
    for _ in range(models_per_check):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 17))
        model = random_strict_tsk(rng, d, k)
        net = rbfn.tsk_to_rbfn(model)
        X = random_inputs(rng, trials, d)
        dev = max(dev, _paired_deviation(model.batch_predict, net.batch_predict, X))
    results.append(CheckResult("tsk_to_rbfn_strict", dev, tol))

    dev = 0.0
    round_trip = 0.0
    for _ in range(models_per_check):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 17))
        model = random_generalized_tsk(rng, d, k)
        net = rbfn.tsk_to_rbfn_generalized(model)
        X = random_inputs(rng, trials, d)
        dev = max(dev, _paired_deviation(model.batch_predict, net.batch_predict, X))
        back = rbfn.rbfn_to_tsk(net)
        round_trip = max(round_trip, 0.0 if back == model else 1.0)
    results.append(CheckResult("tsk_to_rbfn_generalized", dev, tol))
    results.append(CheckResult("rbfn_round_trip_parameters", round_trip, tol))

    dev = 0.0
    round_trip = 0.0
    for _ in range(models_per_check):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 17))
        model = random_conforming_tsk(rng, d, k)
        mixture = moe.tsk_to_moe(model)
        X = random_inputs(rng, trials, d)
        dev = max(dev, _paired_deviation(model.batch_predict, mixture.batch_predict, X))
        back = moe.moe_to_tsk(mixture)
        round_trip = max(round_trip, 0.0 if back == model else 1.0)
    results.append(CheckResult("tsk_to_moe", dev, tol))
    results.append(CheckResult("moe_round_trip_parameters", round_trip, tol))

    dev = 0.0
    for _ in range(models_per_check):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 17))
        mixture = random_moe(rng, d, k)
        model = moe.moe_to_tsk(mixture)
        X = random_inputs(rng, trials, d)
        dev = max(dev, _paired_deviation(mixture.batch_predict, model.batch_predict, X))
    results.append(CheckResult("moe_to_tsk", dev, tol))

    dev = 0.0
    for _ in range(models_per_check):
        d = int(rng.integers(1, 4))
        ftree = random_fuzzy_tree(rng, d, max_leaves=int(rng.integers(2, 17)))
        model = cart.fuzzy_tree_to_tsk(ftree)
        X = random_inputs(rng, trials, d)
        dev = max(dev, _paired_deviation(ftree.batch_predict, model.batch_predict, X))
    results.append(CheckResult("fuzzy_tree_to_tsk", dev, tol))

    dev = 0.0
    for _ in range(models_per_check):
        d, k = int(rng.integers(1, 5)), int(rng.integers(2, 17))
        mixture = random_moe(rng, d, k)
        X = random_inputs(rng, trials, d)
        w = mixture.batch_gate_weights(X)
        # adding one constant to every gate value must not move the weights
        values = mixture.batch_gate_values(X) + 7.25
        w_shifted = np.exp(values - values.max(axis=1, keepdims=True))
        w_shifted /= w_shifted.sum(axis=1, keepdims=True)
        dev = max(dev, float(np.max(np.abs(w - w_shifted))))
    results.append(CheckResult("softmax_shift_invariance", dev, max(tol, 1e-12)))
    return results


def gradient_suite(trials=20, tol=1e-4, seed=0):
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    for _ in range(trials):
        d, k = int(rng.integers(1, 4)), int(rng.integers(2, 9))
        model = random_conforming_tsk(rng, d, k)
        data = Dataset(random_inputs(rng, 20, d), rng.normal(size=20))

        def sse(params, model=model, data=data):
            candidate = anfis.with_antecedent_parameters(model, params)
            r = data.targets - candidate.batch_predict(data.inputs)
            return float((r * r).sum())

        analytic = anfis.antecedent_gradients(model, data)
        numeric = finite_difference(sse, anfis.antecedent_parameters(model))
        worst = max(worst, gradient_relative_error(analytic, numeric))
    results.append(CheckResult("antecedent_gradients", worst, tol))

    for loss_kind in moe.LOSS_KINDS:
        worst = 0.0
        for _ in range(trials):
            d, k = int(rng.integers(1, 4)), int(rng.integers(2, 5))
            mixture = random_moe(rng, d, k)
            data = Dataset(random_inputs(rng, 20, d), rng.normal(size=20))
            lam = float(rng.uniform(0.1, 2.0))

            def loss(params, mixture=mixture, data=data, lam=lam, loss_kind=loss_kind):
                candidate = moe.with_parameters(mixture, params)
                return moe._loss_value(candidate, data, loss_kind, lam)

            analytic = moe.loss_gradients(mixture, data, loss_kind, lam)
            numeric = finite_difference(loss, moe.parameter_vector(mixture))
            worst = max(worst, gradient_relative_error(analytic, numeric))
        results.append(CheckResult(f"moe_{loss_kind}_gradients", worst, tol))
    return results


def oracle_suite(trials=200, tol=1e-10, seed=0):
    rng = np.random.default_rng(seed)
    results = []

    def run(name, build, batch_predict, oracle):
        worst = 0.0
        for _ in range(4):
            obj, d = build()
            X = random_inputs(rng, trials, d)
            fast = batch_predict(obj, X)
            slow = np.array([oracle(obj, x) for x in X])
            worst = max(worst, float(np.max(np.abs(fast - slow))))
        results.append(CheckResult(name, worst, tol))

    def build_tsk():
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 13))
        return random_generalized_tsk(rng, d, k), d

    def build_rbfn():
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 13))
        return rbfn.tsk_to_rbfn_generalized(random_generalized_tsk(rng, d, k)), d

    def build_moe():
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 13))
        return random_moe(rng, d, k), d

    def build_ftree():
        d = int(rng.integers(1, 4))
        return random_fuzzy_tree(rng, d, max_leaves=8), d

    def build_stack():
        d = int(rng.integers(1, 4))
        data = Dataset(random_inputs(rng, 40, d), rng.normal(size=40))
        bases = stacking.fit_bases(data, 4, seed=int(rng.integers(1 << 16)))
        if rng.uniform() < 0.5:
            return stacking.fit_constant_stack(bases, data), d
        return stacking.fit_adaptive_stack(bases, data, anfis.TrainConfig(epochs=5, learning_rate=1e-3)), d

    run("tsk_predict_vs_definition", build_tsk, lambda m, X: m.batch_predict(X), oracle_tsk_predict)
    run("rbfn_predict_vs_definition", build_rbfn, lambda m, X: m.batch_predict(X), oracle_rbfn_predict)
    run("moe_predict_vs_definition", build_moe, lambda m, X: m.batch_predict(X), oracle_moe_predict)
    run("fuzzy_tree_vs_leaf_enumeration", build_ftree, lambda t, X: t.batch_predict(X), oracle_fuzzy_tree_predict)
    run("stack_predict_vs_definition", build_stack, lambda s, X: s.batch_predict(X), oracle_stack_predict)
    return results


SUITES = {
    "equivalence": equivalence_suite,
    "gradients": gradient_suite,
    "oracles": oracle_suite,
}


def run_suite(name: str, trials: int, tol: float, seed: int = 0):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    if name == "gradients":
        return gradient_suite(trials=max(1, trials // 50), tol=tol, seed=seed)
    return SUITES[name](trials=trials, tol=tol, seed=seed)
