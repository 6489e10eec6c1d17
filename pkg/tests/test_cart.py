import math

import numpy as np
import pytest

from fuzzybridge.anfis import lse_consequents
from fuzzybridge.cart import (
    FuzzyRegressionTree,
    Internal,
    Leaf,
    RegressionTree,
    batch_support_predict,
    extract_crisp_rules,
    fit_support,
    fit_tree,
    fuzzify_tree,
    fuzzy_tree_predict,
    fuzzy_tree_to_tsk,
    support_predict,
    tree_predict,
)
from fuzzybridge.data import DataSpec, Dataset, generate
from fuzzybridge.errors import NumericalError
from fuzzybridge.model import Affine, Constant, mse
from fuzzybridge.verify import oracle_fuzzy_tree_predict, random_inputs


def fig_style_tree():
    # two features, three leaves: split on x0 at 5, then x1 at 5 on the left
    return RegressionTree(
        2,
        Internal(
            0,
            5.0,
            Internal(1, 5.0, Leaf(Constant(30.0)), Leaf(Constant(60.0))),
            Leaf(Constant(10.0)),
        ),
    )


class TestFitTree:
    def test_constant_targets_single_leaf(self):
        rng = np.random.default_rng(60)
        data = Dataset(rng.uniform(0, 1, (30, 2)), np.full(30, 7.5))
        tree = fit_tree(data, max_leaves=8)
        assert tree.n_leaves == 1
        assert isinstance(tree.root, Leaf)
        assert tree.root.consequent.value == 7.5

    def test_recovers_planted_step(self):
        data = generate(DataSpec("step", 200))
        tree = fit_tree(data, max_leaves=2)
        assert isinstance(tree.root, Internal)
        assert tree.root.feature == 0
        grid_step = 1.0 / 199
        assert abs(tree.root.threshold - 0.5) <= grid_step

    def test_max_leaves_one_gives_global_mean(self):
        rng = np.random.default_rng(61)
        y = rng.normal(size=25)
        data = Dataset(rng.uniform(0, 1, (25, 1)), y)
        tree = fit_tree(data, max_leaves=1)
        assert isinstance(tree.root, Leaf)
        assert tree.root.consequent.value == pytest.approx(y.mean(), abs=1e-12)

    def test_root_split_is_exhaustively_optimal(self):
        # oracle: brute-force scan of every midpoint on every feature
        rng = np.random.default_rng(62)
        X = rng.uniform(0, 1, (50, 2))
        y = rng.normal(size=50)
        data = Dataset(X, y)
        tree = fit_tree(data, max_leaves=2)

        def sse(v):
            return ((v - v.mean()) ** 2).sum() if len(v) else 0.0

        best = None
        for f in range(2):
            for t in (np.unique(X[:, f])[:-1] + np.unique(X[:, f])[1:]) / 2.0:
                mask = X[:, f] < t
                red = sse(y) - sse(y[mask]) - sse(y[~mask])
                if best is None or red > best[0]:
                    best = (red, f, t)
        assert isinstance(tree.root, Internal)
        assert (tree.root.feature, tree.root.threshold) == (best[1], best[2])

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(63)
        data = Dataset(rng.uniform(0, 1, (40, 1)), rng.normal(size=40))
        tree = fit_tree(data, max_leaves=10, min_leaf=15)
        counts = []

        def count(node, idx):
            if isinstance(node, Leaf):
                counts.append(len(idx))
                return
            mask = data.inputs[idx, node.feature] < node.threshold
            count(node.left, idx[mask])
            count(node.right, idx[~mask])

        count(tree.root, np.arange(40))
        assert all(c >= 15 for c in counts)

    def test_leaf_budget(self):
        rng = np.random.default_rng(64)
        data = Dataset(rng.uniform(0, 1, (200, 2)), rng.normal(size=200))
        tree = fit_tree(data, max_leaves=6)
        assert tree.n_leaves == 6

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            fit_tree(Dataset(np.zeros((0, 1)), np.zeros(0)), max_leaves=2)


class TestCrispRules:
    def test_single_leaf_constant_everywhere(self):
        tree = RegressionTree(2, Leaf(Constant(4.0)))
        assert tree_predict(tree, [100.0, -100.0]) == 4.0
        (rule,) = extract_crisp_rules(tree)
        assert rule.tests == ()

    def test_three_leaf_structure(self):
        rules = extract_crisp_rules(fig_style_tree())
        assert len(rules) == 3
        assert sorted(len(r.tests) for r in rules) == [1, 2, 2]
        by_value = {r.consequent.value: r for r in rules}
        assert by_value[30.0].tests == ((0, "<", 5.0), (1, "<", 5.0))
        assert by_value[10.0].tests == ((0, ">=", 5.0),)

    def test_rules_partition_space(self):
        rng = np.random.default_rng(65)
        data = Dataset(rng.uniform(0, 1, (150, 2)), rng.normal(size=150))
        tree = fit_tree(data, max_leaves=7)
        rules = extract_crisp_rules(tree)
        for x in rng.uniform(0, 1, (1000, 2)):
            hits = [r for r in rules if r.matches(x)]
            assert len(hits) == 1
            assert hits[0].consequent.value == tree_predict(tree, x)


class TestFuzzify:
    def test_single_leaf_identity(self):
        tree = RegressionTree(1, Leaf(Constant(2.0)))
        ftree = fuzzify_tree(tree, steepness=3.0)
        assert fuzzy_tree_predict(ftree, [0.4]) == 2.0

    def test_midpoint_blends_children_equally(self):
        tree = RegressionTree(1, Internal(0, 0.5, Leaf(Constant(0.0)), Leaf(Constant(4.0))))
        ftree = fuzzify_tree(tree, steepness=2.0)
        assert fuzzy_tree_predict(ftree, [0.5]) == pytest.approx(2.0, abs=1e-14)

    def test_large_steepness_approaches_crisp(self):
        rng = np.random.default_rng(66)
        data = Dataset(rng.uniform(0, 1, (120, 2)), rng.normal(size=120))
        tree = fit_tree(data, max_leaves=6)
        ftree = fuzzify_tree(tree, steepness=1e6)
        thresholds = {}
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                thresholds.setdefault(node.feature, []).append(node.threshold)
                stack.extend([node.left, node.right])
        for x in rng.uniform(0, 1, (300, 2)):
            if any(
                abs(x[f] - t) < 0.01 for f, ts in thresholds.items() for t in ts
            ):
                continue
            assert abs(fuzzy_tree_predict(ftree, x) - tree_predict(tree, x)) < 1e-6

    def test_default_policy_uses_threshold_gaps(self):
        tree = RegressionTree(
            1,
            Internal(
                0, 0.4,
                Leaf(Constant(0.0)),
                Internal(0, 0.6, Leaf(Constant(1.0)), Leaf(Constant(2.0))),
            ),
        )
        ftree = fuzzify_tree(tree)
        # gap between 0.4 and 0.6 is 0.2 -> alpha = 8 / 0.2 = 40
        assert ftree.root.alpha == pytest.approx(40.0)
        assert ftree.root.right.alpha == pytest.approx(40.0)

    def test_default_policy_range_fallback(self):
        tree = RegressionTree(1, Internal(0, 0.5, Leaf(Constant(0.0)), Leaf(Constant(1.0))))
        ftree = fuzzify_tree(tree, feature_ranges=[(0.0, 2.0)])
        # sole threshold on the feature -> gap = range / 10 = 0.2
        assert ftree.root.alpha == pytest.approx(40.0)

    def test_alpha_required_positive(self):
        tree = RegressionTree(1, Internal(0, 0.5, Leaf(Constant(0.0)), Leaf(Constant(1.0))))
        with pytest.raises(ValueError):
            fuzzify_tree(tree, steepness=0.0)
        with pytest.raises(ValueError):
            FuzzyRegressionTree(1, tree.root)  # missing alphas


class TestFuzzyPredict:
    def test_path_grades_sum_to_one(self):
        rng = np.random.default_rng(67)
        for _ in range(5):
            d = int(rng.integers(1, 4))
            data = Dataset(rng.uniform(0, 1, (80, d)), rng.normal(size=80))
            tree = fit_tree(data, max_leaves=int(rng.integers(2, 12)))
            ftree = fuzzify_tree(tree, feature_ranges=[(0.0, 1.0)] * d)
            X = rng.uniform(-0.5, 1.5, (200, d))
            sums = ftree.batch_leaf_weights(X).sum(axis=1)
            assert np.max(np.abs(sums - 1.0)) < 1e-12

    def test_matches_leaf_enumeration(self):
        rng = np.random.default_rng(68)
        data = Dataset(rng.uniform(0, 1, (100, 2)), rng.normal(size=100))
        ftree = fuzzify_tree(fit_tree(data, max_leaves=8), steepness=5.0)
        for x in rng.uniform(0, 1, (100, 2)):
            assert fuzzy_tree_predict(ftree, x) == pytest.approx(
                oracle_fuzzy_tree_predict(ftree, x), abs=1e-12
            )

    def test_two_leaf_midpoint_mean(self):
        tree = RegressionTree(1, Internal(0, 1.0, Leaf(Constant(-2.0)), Leaf(Constant(6.0))))
        ftree = fuzzify_tree(tree, steepness=7.0)
        assert fuzzy_tree_predict(ftree, [1.0]) == pytest.approx(2.0, abs=1e-13)


class TestFuzzyTreeToTsk:
    def test_three_leaf_agreement(self):
        ftree = fuzzify_tree(fig_style_tree(), steepness=1.5)
        model = fuzzy_tree_to_tsk(ftree)
        assert model.n_rules == 3
        rng = np.random.default_rng(69)
        X = rng.uniform(0, 10, (1000, 2))
        dev = np.max(np.abs(ftree.batch_predict(X) - model.batch_predict(X)))
        assert dev < 1e-12

    def test_repeated_feature_paths(self):
        tree = RegressionTree(
            1,
            Internal(
                0, 8.0,
                Internal(0, 3.0, Leaf(Constant(1.0)), Leaf(Constant(2.0))),
                Leaf(Constant(3.0)),
            ),
        )
        ftree = fuzzify_tree(tree, steepness=2.0)
        model = fuzzy_tree_to_tsk(ftree)
        deep_rule = model.rules[0]
        assert [c.feature for c in deep_rule.antecedent.clauses] == [0, 0]
        rng = np.random.default_rng(70)
        X = rng.uniform(-2, 12, (500, 1))
        np.testing.assert_allclose(
            ftree.batch_predict(X), model.batch_predict(X), atol=1e-12
        )

    def test_single_leaf_vacuous_rule(self):
        ftree = FuzzyRegressionTree(2, Leaf(Constant(1.5)))
        model = fuzzy_tree_to_tsk(ftree)
        assert model.n_rules == 1
        assert model.rules[0].antecedent.clauses == ()

    def test_upgrade_affine_enables_lse_refinement(self):
        # piecewise-linear data: constant leaves underfit, affine consequents
        # refit by least squares must do strictly better
        data = generate(DataSpec("piecewise_linear", 300, seed=8))
        tree = fit_tree(data, max_leaves=4)
        ftree = fuzzify_tree(tree, feature_ranges=[(0.0, 1.0)])
        constant_model = fuzzy_tree_to_tsk(ftree, upgrade_affine=False)
        affine_model = lse_consequents(
            fuzzy_tree_to_tsk(ftree, upgrade_affine=True), data
        )
        constant_mse = mse(constant_model.batch_predict(data.inputs), data.targets)
        affine_mse = mse(affine_model.batch_predict(data.inputs), data.targets)
        assert affine_mse < constant_mse

    def test_upgrade_affine_intercepts_keep_leaf_values(self):
        ftree = fuzzify_tree(fig_style_tree(), steepness=2.0)
        model = fuzzy_tree_to_tsk(ftree, upgrade_affine=True)
        assert all(r.consequent.slopes == (0.0, 0.0) for r in model.rules)
        assert sorted(r.consequent.intercept for r in model.rules) == [10.0, 30.0, 60.0]


class TestCrispLimit:
    def test_deviation_shrinks_with_steepness(self):
        rng = np.random.default_rng(71)
        data = Dataset(rng.uniform(0, 1, (300, 2)), rng.normal(size=300))
        tree = fit_tree(data, max_leaves=16)
        thresholds = {}
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                thresholds.setdefault(node.feature, []).append(node.threshold)
                stack.extend([node.left, node.right])
        margin = 0.005
        X = rng.uniform(0, 1, (2000, 2))
        keep = np.ones(len(X), dtype=bool)
        for f, ts in thresholds.items():
            for t in ts:
                keep &= np.abs(X[:, f] - t) > margin
        X = X[keep]
        crisp = tree.batch_predict(X)
        deviations = []
        for alpha in (1.0, 10.0, 100.0, 1e4):
            ftree = fuzzify_tree(tree, steepness=alpha)
            deviations.append(np.max(np.abs(ftree.batch_predict(X) - crisp)))
        assert all(b <= a for a, b in zip(deviations, deviations[1:]))
        assert deviations[-1] < 1e-3


class TestSupport:
    def test_single_partition_is_plain_regression(self):
        rng = np.random.default_rng(72)
        X = rng.uniform(0, 1, (30, 2))
        y = 2.0 * X[:, 0] - 1.0 * X[:, 1] + 0.5
        data = Dataset(X, y)
        tree = RegressionTree(2, Leaf(Constant(0.0)))
        (part,) = fit_support(data, tree)
        np.testing.assert_allclose(part.consequent.slopes, [2.0, -1.0], atol=1e-8)
        assert part.consequent.intercept == pytest.approx(0.5, abs=1e-8)

    def test_globally_linear_data_reproduced(self):
        rng = np.random.default_rng(73)
        X = rng.uniform(0, 1, (200, 2))
        y = 3.0 * X[:, 0] + 1.0 * X[:, 1] - 2.0
        data = Dataset(X, y)
        tree = fit_tree(data, max_leaves=4)
        partitions = fit_support(data, tree)
        for x in rng.uniform(0, 1, (200, 2)):
            expected = 3.0 * x[0] + 1.0 * x[1] - 2.0
            assert support_predict(partitions, x) == pytest.approx(expected, abs=1e-8)

    def test_matches_definition(self):
        # oracle: gaussian weights and weighted average computed longhand
        rng = np.random.default_rng(74)
        data = Dataset(rng.uniform(0, 1, (100, 2)), rng.normal(size=100))
        tree = fit_tree(data, max_leaves=3, min_leaf=10)
        partitions = fit_support(data, tree)
        for x in rng.uniform(0, 1, (50, 2)):
            weights = []
            values = []
            for p in partitions:
                s = sum(
                    (x[i] - m) ** 2 / (w * w)
                    for i, (m, w) in enumerate(zip(p.means, p.widths))
                )
                weights.append(math.exp(-s))
                values.append(p.consequent.evaluate(x))
            expected = sum(w * v for w, v in zip(weights, values)) / sum(weights)
            assert support_predict(partitions, x) == pytest.approx(expected, abs=1e-12)

    def test_partition_too_small(self):
        rng = np.random.default_rng(75)
        X = rng.uniform(0, 1, (10, 2))
        y = rng.normal(size=10)
        tree = RegressionTree(2, Internal(0, float(np.sort(X[:, 0])[1]) + 1e-9,
                                          Leaf(Constant(0.0)), Leaf(Constant(0.0))))
        with pytest.raises(NumericalError, match="partition"):
            fit_support(Dataset(X, y), tree)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(76)
        data = Dataset(rng.uniform(0, 1, (60, 1)), rng.normal(size=60))
        tree = fit_tree(data, max_leaves=2, min_leaf=5)
        partitions = fit_support(data, tree)
        X = rng.uniform(0, 1, (40, 1))
        batch = batch_support_predict(partitions, X)
        for i, x in enumerate(X):
            assert batch[i] == support_predict(partitions, x)
