import numpy as np
import pytest

from fuzzybridge.anfis import TrainConfig, cluster_init
from fuzzybridge.data import DataSpec, Dataset, generate, split
from fuzzybridge.errors import DegenerateRuleError
from fuzzybridge.membership import Gaussian, gaussian_grid
from fuzzybridge.model import Antecedent, Clause, mse
from fuzzybridge.stacking import (
    AdaptiveGates,
    BaseModel,
    ConstantWeights,
    StackModel,
    bootstrap_indices,
    fit_adaptive_stack,
    fit_bases,
    fit_constant_stack,
    local_rule_fit,
    nozaki_fit,
    stack_predict,
    stack_report,
)
from fuzzybridge.verify import oracle_stack_predict


class TestBootstrap:
    def test_single_element(self):
        np.testing.assert_array_equal(bootstrap_indices(1, seed=0), [0])

    def test_unique_fraction(self):
        # with replacement, the expected unique fraction is 1 - 1/e = 0.632...
        n = 10_000
        unique = len(np.unique(bootstrap_indices(n, seed=42)))
        assert abs(unique / n - 0.632) < 0.02

    def test_seeded_determinism(self):
        np.testing.assert_array_equal(bootstrap_indices(100, 7), bootstrap_indices(100, 7))

    def test_in_range(self):
        idx = bootstrap_indices(50, 3)
        assert idx.min() >= 0 and idx.max() < 50


class TestFitBases:
    def test_recovers_noise_free_line(self):
        rng = np.random.default_rng(80)
        X = rng.uniform(-1, 1, (100, 3))
        y = X @ np.array([1.5, -2.0, 0.5]) + 0.25
        bases = fit_bases(Dataset(X, y), 5, seed=0, ridge=1e-8)
        for base in bases:
            np.testing.assert_allclose(base.coeffs, [1.5, -2.0, 0.5], atol=1e-4)
            assert base.intercept == pytest.approx(0.25, abs=1e-4)

    def test_zero_bases_rejected(self):
        data = Dataset([[0.0], [1.0]], [0.0, 1.0])
        with pytest.raises(ValueError):
            fit_bases(data, 0, seed=0)

    def test_different_seeds_differ_on_noisy_data(self):
        data = generate(DataSpec("piecewise_linear", 80, noise_sd=0.3, seed=4))
        a = fit_bases(data, 3, seed=1)
        b = fit_bases(data, 3, seed=2)
        assert any(x.coeffs != y.coeffs for x, y in zip(a, b))

    def test_provenance_recorded(self):
        data = generate(DataSpec("piecewise_linear", 50, seed=5))
        bases = fit_bases(data, 3, seed=9, ridge=1e-6)
        assert len({b.seed for b in bases}) == 3
        assert all(b.ridge == 1e-6 for b in bases)


class TestConstantStack:
    def test_perfect_base_gets_unit_weight(self):
        rng = np.random.default_rng(81)
        X = rng.uniform(-1, 1, (60, 2))
        y = X @ np.array([2.0, -1.0]) + 3.0
        exact = BaseModel((2.0, -1.0), 3.0, seed=0, ridge=0.0)
        noise = BaseModel((0.3, 0.4), -1.0, seed=1, ridge=0.0)
        stack = fit_constant_stack([exact, noise], Dataset(X, y))
        assert stack.combiner.weights[0] == pytest.approx(1.0, abs=1e-5)
        assert stack.combiner.weights[1] == pytest.approx(0.0, abs=1e-5)
        assert stack.combiner.intercept == pytest.approx(0.0, abs=1e-4)

    def test_duplicate_bases_prediction_invariant(self):
        rng = np.random.default_rng(82)
        data = generate(DataSpec("piecewise_linear", 100, noise_sd=0.1, seed=6))
        base = fit_bases(data, 1, seed=0)[0]
        stack = fit_constant_stack([base, base], data)
        single = fit_constant_stack([base], data)
        X = rng.uniform(0, 1, (50, 1))
        np.testing.assert_allclose(
            stack.batch_predict(X), single.batch_predict(X), atol=1e-6
        )

    def test_dominates_best_base(self):
        data = generate(DataSpec("friedman1", 150, noise_sd=0.5, seed=7))
        bases = fit_bases(data, 6, seed=3)
        stack = fit_constant_stack(bases, data)
        stack_mse = mse(stack.batch_predict(data.inputs), data.targets)
        best_base = min(mse(b.batch_predict(data.inputs), data.targets) for b in bases)
        assert stack_mse <= best_base + 1e-9


class TestAdaptiveStack:
    def test_zero_learning_rate_is_unweighted_mean(self):
        data = generate(DataSpec("piecewise_linear", 60, seed=8))
        bases = fit_bases(data, 3, seed=0)
        stack = fit_adaptive_stack(bases, data, TrainConfig(epochs=5, learning_rate=0.0))
        P = np.column_stack([b.batch_predict(data.inputs) for b in bases])
        np.testing.assert_allclose(
            stack.batch_predict(data.inputs), P.mean(axis=1), atol=1e-12
        )

    def test_beats_constant_stack_on_two_regimes(self):
        from fuzzybridge.data import PIECEWISE_LEFT, PIECEWISE_RIGHT

        data = generate(DataSpec("piecewise_linear", 400, seed=11))
        train, test = split(data, 0.25, seed=5)
        bases = [
            BaseModel((PIECEWISE_LEFT[0],), PIECEWISE_LEFT[1], seed=0, ridge=0.0),
            BaseModel((PIECEWISE_RIGHT[0],), PIECEWISE_RIGHT[1], seed=1, ridge=0.0),
        ]
        constant = fit_constant_stack(bases, train)
        adaptive = fit_adaptive_stack(bases, train, TrainConfig(epochs=2000, learning_rate=1e-2))
        constant_mse = mse(constant.batch_predict(test.inputs), test.targets)
        adaptive_mse = mse(adaptive.batch_predict(test.inputs), test.targets)
        assert adaptive_mse < constant_mse

    def test_gate_gradient_check(self):
        from fuzzybridge.moe import AffineGate, _softmax_rows
        from fuzzybridge.stacking import _gate_gradients
        from fuzzybridge.verify import gradient_relative_error

        rng = np.random.default_rng(83)
        X = rng.uniform(-1, 1, (25, 2))
        y = rng.normal(size=25)
        P = rng.normal(size=(25, 3))
        weights = rng.normal(size=(3, 2))
        biases = rng.normal(size=3)

        def loss(flat):
            w = flat[:6].reshape(3, 2)
            b = flat[6:]
            G = X @ w.T + b
            pred = (_softmax_rows(G) * P).sum(axis=1)
            return float(((y - pred) ** 2).sum())

        G = X @ weights.T + biases
        grads = _gate_gradients(X, P, y, G)
        analytic = np.concatenate([np.concatenate([gw, [gb]]) for gw, gb in grads])
        # reorder: loss() packs all weights first, then biases
        analytic = np.concatenate(
            [np.concatenate([grads[k][0] for k in range(3)]), [grads[k][1] for k in range(3)]]
        )
        flat = np.concatenate([weights.ravel(), biases])
        step = 1e-6
        numeric = np.empty_like(flat)
        for i in range(len(flat)):
            up, down = flat.copy(), flat.copy()
            up[i] += step
            down[i] -= step
            numeric[i] = (loss(up) - loss(down)) / (2 * step)
        assert gradient_relative_error(analytic, numeric) < 1e-4


class TestStackPredict:
    def test_single_base_identity(self):
        base = BaseModel((2.0,), 1.0, seed=0, ridge=0.0)
        stack = StackModel(1, (base,), ConstantWeights((1.0,), 0.0))
        assert stack_predict(stack, [3.0]) == base.predict([3.0])

    def test_equal_adaptive_gates_average(self):
        from fuzzybridge.moe import AffineGate

        bases = (
            BaseModel((0.0,), 2.0, seed=0, ridge=0.0),
            BaseModel((0.0,), 6.0, seed=1, ridge=0.0),
        )
        stack = StackModel(1, bases, AdaptiveGates((AffineGate((0.0,), 0.0), AffineGate((0.0,), 0.0))))
        assert stack_predict(stack, [0.7]) == pytest.approx(4.0, abs=1e-14)

    def test_matches_definition(self):
        rng = np.random.default_rng(84)
        data = generate(DataSpec("friedman1", 80, noise_sd=0.2, seed=9))
        bases = fit_bases(data, 4, seed=2)
        for stack in (
            fit_constant_stack(bases, data),
            fit_adaptive_stack(bases, data, TrainConfig(epochs=20, learning_rate=1e-3)),
        ):
            for x in rng.uniform(0, 1, (50, 5)):
                assert stack.predict(x) == pytest.approx(oracle_stack_predict(stack, x), abs=1e-12)

    def test_report_schema(self):
        data = generate(DataSpec("piecewise_linear", 60, seed=10))
        train, test = split(data, 0.3, seed=1)
        bases = fit_bases(train, 3, seed=4)
        report = stack_report(fit_constant_stack(bases, train), train, test)
        assert {"bases", "combiner", "stack_train_mse", "stack_test_mse"} <= set(report)
        assert all({"seed", "coeffs", "train_mse"} <= set(b) for b in report["bases"])


class TestNozaki:
    def test_single_example(self):
        data = Dataset([[0.3, 0.7]], [5.5])
        grid = [gaussian_grid(0.0, 1.0, 2), gaussian_grid(0.0, 1.0, 2)]
        model, flagged = nozaki_fit(data, grid, alpha=1.0)
        assert model.n_rules == 4
        assert flagged == []
        assert all(r.consequent.value == 5.5 for r in model.rules)

    def test_uniform_firing_gives_mean(self):
        # all examples at the cell center fire every rule equally per example
        rng = np.random.default_rng(85)
        y = rng.normal(size=40)
        X = np.full((40, 1), 0.5)
        model, _ = nozaki_fit(Dataset(X, y), [gaussian_grid(0.0, 1.0, 3)], alpha=1.0)
        for rule in model.rules:
            assert rule.consequent.value == pytest.approx(y.mean(), abs=1e-12)

    def test_sharpening_limit(self):
        # alpha = 10 on well-separated data: each cell's consequent approaches
        # the target of its maximal-firing example
        X = np.array([[0.0], [1.0]])
        y = np.array([-3.0, 7.0])
        grid = [[Gaussian(0.0, 0.25), Gaussian(1.0, 0.25)]]
        model, _ = nozaki_fit(Dataset(X, y), grid, alpha=10.0)
        assert model.rules[0].consequent.value == pytest.approx(-3.0, abs=1e-3)
        assert model.rules[1].consequent.value == pytest.approx(7.0, abs=1e-3)

    def test_consequents_bounded_by_targets(self):
        rng = np.random.default_rng(86)
        data = Dataset(rng.uniform(0, 1, (60, 2)), rng.normal(size=60))
        grid = [gaussian_grid(0.0, 1.0, 3), gaussian_grid(0.0, 1.0, 3)]
        model, _ = nozaki_fit(data, grid, alpha=2.0)
        lo, hi = data.targets.min(), data.targets.max()
        for rule in model.rules:
            assert lo <= rule.consequent.value <= hi

    def test_empty_cell_flagged_with_global_mean(self):
        # a cell centered far away with a tiny width never fires
        X = np.array([[0.0], [0.1]])
        y = np.array([1.0, 3.0])
        grid = [[Gaussian(0.05, 0.5), Gaussian(1000.0, 1e-3)]]
        model, flagged = nozaki_fit(Dataset(X, y), grid, alpha=1.0)
        assert flagged == [1]
        assert model.rules[1].consequent.value == pytest.approx(2.0)

    def test_alpha_must_be_positive(self):
        data = Dataset([[0.0]], [1.0])
        with pytest.raises(ValueError):
            nozaki_fit(data, [gaussian_grid(0.0, 1.0, 2)], alpha=0.0)


class TestLocalRuleFit:
    def test_unit_weights_match_normal_equations(self):
        # oracle: closed-form least squares via normal equations
        rng = np.random.default_rng(87)
        X = rng.uniform(-1, 1, (30, 2))
        y = rng.normal(size=30)
        model = local_rule_fit(Dataset(X, y), [Antecedent()])
        A = np.column_stack([X, np.ones(30)])
        theta = np.linalg.solve(A.T @ A, A.T @ y)
        np.testing.assert_allclose(
            list(model.rules[0].consequent.slopes) + [model.rules[0].consequent.intercept],
            theta,
            atol=1e-10,
        )

    def test_globally_linear_recovered_by_every_rule(self):
        rng = np.random.default_rng(88)
        X = rng.uniform(0, 1, (150, 2))
        y = X @ np.array([4.0, -2.5]) + 1.0
        data = Dataset(X, y)
        antecedents = [r.antecedent for r in cluster_init(data, 4, seed=0).rules]
        model = local_rule_fit(data, antecedents)
        for rule in model.rules:
            np.testing.assert_allclose(rule.consequent.slopes, [4.0, -2.5], atol=1e-6)
            assert rule.consequent.intercept == pytest.approx(1.0, abs=1e-6)

    def test_insufficient_mass_is_degenerate(self):
        rng = np.random.default_rng(89)
        X = rng.uniform(0, 1, (20, 2))
        y = rng.normal(size=20)
        # antecedent centered far away: total firing mass ~ 0 < d + 2
        far = Antecedent((Clause(0, Gaussian(100.0, 0.1)), Clause(1, Gaussian(100.0, 0.1))))
        with pytest.raises(DegenerateRuleError, match="rule 0"):
            local_rule_fit(Dataset(X, y), [far])

    def test_collinear_support_is_degenerate(self):
        # weight mass sits on 3 collinear points in d = 2
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [50.0, -50.0]])
        y = np.array([0.0, 1.0, 2.0, 3.0])
        tight = Antecedent((Clause(0, Gaussian(1.0, 3.0)), Clause(1, Gaussian(1.0, 3.0))))
        with pytest.raises(DegenerateRuleError):
            local_rule_fit(Dataset(X, y), [tight])

    def test_error_names_offending_rule(self):
        rng = np.random.default_rng(90)
        X = rng.uniform(0, 1, (20, 1))
        y = rng.normal(size=20)
        good = Antecedent()
        bad = Antecedent((Clause(0, Gaussian(50.0, 0.01)),))
        with pytest.raises(DegenerateRuleError, match="rule 1"):
            local_rule_fit(Dataset(X, y), [good, bad])
