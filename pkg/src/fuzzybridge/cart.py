"""Regression trees, their sigmoid-softened variant, and rule extraction.

Trees are grown best-first: the open leaf whose best split removes the most
summed squared error is split next, until the leaf budget is reached or no
split reduces the error. Split thresholds sit at midpoints of consecutive
distinct sorted feature values; ties prefer the lowest feature index, then
the lowest threshold.

Fuzzification replaces each Boolean test x_f < t with a complementary
sigmoid pair (falling ramp to the left child, rising ramp to the right), so
a leaf's weight is the product of its path grades and the weights over all
leaves sum to one.
"""

import heapq
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import NumericalError
from .membership import WIDTH_FLOOR, SigmoidDown, SigmoidUp
from .model import (
    WEIGHTED_AVERAGE,
    Affine,
    Antecedent,
    Clause,
    Constant,
    Rule,
    TSKModel,
    normalize_firings,
)


@dataclass(frozen=True)
class Leaf:
    consequent: object  # Constant | Affine


@dataclass(frozen=True)
class Internal:
    """Boolean test: left child iff x[feature] < threshold. A fuzzified node
    additionally carries the sigmoid steepness alpha."""

    feature: int
    threshold: float
    left: object
    right: object
    alpha: float | None = None


def _count_leaves(node) -> int:
    if isinstance(node, Leaf):
        return 1
    return _count_leaves(node.left) + _count_leaves(node.right)


def _iter_internal(node):
    if isinstance(node, Internal):
        yield node
        yield from _iter_internal(node.left)
        yield from _iter_internal(node.right)


@dataclass(frozen=True)
class RegressionTree:
    input_dim: int
    root: object

    @property
    def n_leaves(self) -> int:
        return _count_leaves(self.root)

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        node = self.root
        while isinstance(node, Internal):
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.consequent.evaluate(x)

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = np.asarray(inputs, dtype=np.float64)
        out = np.empty(X.shape[0])
        self._fill(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, node, X, idx, out):
        if isinstance(node, Leaf):
            for i in idx:
                out[i] = node.consequent.evaluate(X[i])
            return
        mask = X[idx, node.feature] < node.threshold
        self._fill(node.left, X, idx[mask], out)
        self._fill(node.right, X, idx[~mask], out)


@dataclass(frozen=True)
class FuzzyRegressionTree:
    """Same topology as a crisp tree but every internal node has alpha > 0."""

    input_dim: int
    root: object

    def __post_init__(self):
        for node in _iter_internal(self.root):
            if node.alpha is None or not node.alpha > 0.0:
                raise ValueError("every internal node needs a steepness alpha > 0")

    @property
    def n_leaves(self) -> int:
        return _count_leaves(self.root)

    def batch_leaf_log_weights(self, inputs) -> np.ndarray:
        """(N, K) log path grades, leaves in depth-first left-right order.

        Accumulated in log space with the same ramp formulas as the rule
        kernels, so extracted rule models match to rounding.
        """
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected (N, {self.input_dim}) inputs, got {X.shape}")
        columns = []

        def descend(node, acc):
            if isinstance(node, Leaf):
                columns.append(acc)
                return
            z = node.alpha * (X[:, node.feature] - node.threshold)
            descend(node.left, acc - _softplus_vec(z))
            descend(node.right, acc - _softplus_vec(-z))

        descend(self.root, np.zeros(X.shape[0]))
        return np.column_stack(columns)

    def batch_leaf_weights(self, inputs) -> np.ndarray:
        return np.exp(self.batch_leaf_log_weights(inputs))

    def leaf_consequents(self) -> list:
        out = []

        def descend(node):
            if isinstance(node, Leaf):
                out.append(node.consequent)
                return
            descend(node.left)
            descend(node.right)

        descend(self.root)
        return out

    def batch_predict(self, inputs) -> np.ndarray:
        if isinstance(inputs, Dataset):
            inputs = inputs.inputs
        X = np.asarray(inputs, dtype=np.float64)
        weights = self.batch_leaf_weights(X)
        values = np.column_stack(
            [_batch_consequent(c, X) for c in self.leaf_consequents()]
        )
        return (weights * values).sum(axis=1) / weights.sum(axis=1)

    def predict(self, x) -> float:
        return float(self.batch_predict(np.asarray(x, dtype=float)[None, :])[0])


def _softplus_vec(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _batch_consequent(consequent, X):
    if isinstance(consequent, Constant):
        return np.full(X.shape[0], consequent.value)
    return X @ np.asarray(consequent.slopes) + consequent.intercept


def _best_split(X, y, idx, min_leaf):
    """Best (feature, threshold, sse_reduction) for the region, or None.

    Candidates are midpoints of consecutive distinct sorted values;
    reductions come from prefix sums; ties resolve to the lowest feature
    then the lowest threshold.
    """
    y_region = y[idx]
    if y_region.max() == y_region.min():
        return None
    n = len(idx)
    sse_parent = float((y_region * y_region).sum() - y_region.sum() ** 2 / n)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[idx, f], kind="stable")
        xs = X[idx, f][order]
        ys = y_region[order]
        cum = np.cumsum(ys)
        cum_sq = np.cumsum(ys * ys)
        total, total_sq = cum[-1], cum_sq[-1]
        # split after position i (1-based count i+1 on the left)
        boundaries = np.nonzero(xs[1:] != xs[:-1])[0]
        for i in boundaries:
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            sse_left = cum_sq[i] - cum[i] ** 2 / n_left
            sse_right = (total_sq - cum_sq[i]) - (total - cum[i]) ** 2 / n_right
            reduction = sse_parent - sse_left - sse_right
            threshold = 0.5 * (xs[i] + xs[i + 1])
            if reduction > 0.0 and (
                best is None
                or reduction > best[2]
                or (reduction == best[2] and (f, threshold) < (best[0], best[1]))
            ):
                best = (f, threshold, reduction)
    return best


def fit_tree(dataset: Dataset, max_leaves: int, min_leaf: int = 1) -> RegressionTree:
    """Grow a piecewise-constant tree best-first up to max_leaves leaves."""
    if dataset.n_examples < 1:
        raise ValueError("empty dataset")
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X, y = dataset.inputs, dataset.targets

    # leaves are dicts so children can be patched in as splits happen
    def make_leaf(idx):
        return {"idx": idx, "leaf": True}

    root = make_leaf(np.arange(dataset.n_examples))
    heap = []
    counter = 0

    def offer(leaf):
        nonlocal counter
        split = _best_split(X, y, leaf["idx"], min_leaf)
        if split is not None:
            heapq.heappush(heap, (-split[2], split[0], split[1], counter, leaf, split))
            counter += 1

    offer(root)
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, _, _, _, leaf, (f, threshold, _) = heapq.heappop(heap)
        idx = leaf["idx"]
        mask = X[idx, f] < threshold
        left = make_leaf(idx[mask])
        right = make_leaf(idx[~mask])
        leaf.clear()
        leaf.update({"leaf": False, "feature": f, "threshold": threshold,
                     "left": left, "right": right})
        n_leaves += 1
        offer(left)
        offer(right)

    def freeze(node):
        if node["leaf"]:
            return Leaf(Constant(float(y[node["idx"]].mean())))
        return Internal(node["feature"], node["threshold"],
                        freeze(node["left"]), freeze(node["right"]))

    return RegressionTree(dataset.input_dim, freeze(root))


def tree_predict(tree: RegressionTree, x) -> float:
    return tree.predict(x)


@dataclass(frozen=True)
class CrispRule:
    """Conjunction of threshold tests ('<' or '>=') and a leaf consequent."""

    tests: tuple  # of (feature, op, threshold)
    consequent: object

    def matches(self, x) -> bool:
        for f, op, t in self.tests:
            if op == "<":
                if not x[f] < t:
                    return False
            elif not x[f] >= t:
                return False
        return True


def extract_crisp_rules(tree: RegressionTree) -> list:
    """One rule per leaf, depth-first left-right; regions partition the space."""
    rules = []

    def descend(node, tests):
        if isinstance(node, Leaf):
            rules.append(CrispRule(tuple(tests), node.consequent))
            return
        descend(node.left, tests + [(node.feature, "<", node.threshold)])
        descend(node.right, tests + [(node.feature, ">=", node.threshold)])

    descend(tree.root, [])
    return rules


def default_steepness(tree: RegressionTree, feature_ranges=None):
    """Per-node steepness 8 / gap, where gap is the distance to the nearest
    other threshold on the same feature in the tree (fallback: a tenth of
    the feature range when given, else 1)."""
    thresholds = {}
    for node in _iter_internal(tree.root):
        thresholds.setdefault(node.feature, []).append(node.threshold)

    def alpha_for(node):
        gaps = [
            abs(node.threshold - t)
            for t in thresholds[node.feature]
            if t != node.threshold
        ]
        gap = min(gaps) if gaps else 0.0
        if gap <= 0.0:
            if feature_ranges is not None:
                lo, hi = feature_ranges[node.feature]
                gap = (hi - lo) / 10.0
            else:
                gap = 1.0
        return 8.0 / gap

    return alpha_for


def fuzzify_tree(tree: RegressionTree, steepness=None, feature_ranges=None) -> FuzzyRegressionTree:
    """Attach a sigmoid steepness to every internal node.

    steepness may be a number (used everywhere), a callable node -> alpha,
    or None for the default gap-based policy.
    """
    if steepness is None:
        policy = default_steepness(tree, feature_ranges)
    elif callable(steepness):
        policy = steepness
    else:
        alpha = float(steepness)
        if not alpha > 0.0:
            raise ValueError("steepness must be > 0")
        policy = lambda node: alpha

    def descend(node):
        if isinstance(node, Leaf):
            return node
        return replace(node, alpha=float(policy(node)),
                       left=descend(node.left), right=descend(node.right))

    return FuzzyRegressionTree(tree.input_dim, descend(tree.root))


def fuzzy_tree_predict(ftree: FuzzyRegressionTree, x) -> float:
    return ftree.predict(x)


def fuzzy_tree_to_tsk(ftree: FuzzyRegressionTree, upgrade_affine: bool = False) -> TSKModel:
    """One rule per leaf: the path's sigmoid grades become antecedent clauses
    (a feature tested twice keeps both clauses), the leaf value becomes the
    consequent. With upgrade_affine constants become zero-slope affine
    consequents ready for least-squares refinement."""
    rules = []

    def descend(node, clauses):
        if isinstance(node, Leaf):
            consequent = node.consequent
            if upgrade_affine and isinstance(consequent, Constant):
                consequent = consequent.as_affine(ftree.input_dim)
            rules.append(Rule(Antecedent(tuple(clauses), repeated_ok=True), consequent))
            return
        descend(node.left, clauses + [Clause(node.feature, SigmoidDown(node.alpha, node.threshold))])
        descend(node.right, clauses + [Clause(node.feature, SigmoidUp(node.alpha, node.threshold))])

    descend(ftree.root, [])
    return TSKModel(ftree.input_dim, tuple(rules), WEIGHTED_AVERAGE)


@dataclass(frozen=True)
class SupportPartition:
    """Gaussian-weighted local affine patch: per-feature means and widths
    plus the locally fitted consequent."""

    means: tuple
    widths: tuple
    consequent: Affine

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if any(not w > 0.0 for w in self.widths):
            raise ValueError("widths must be > 0")

    def batch_log_weights(self, X) -> np.ndarray:
        m = np.asarray(self.means)
        v = np.asarray(self.widths) ** 2
        return -((X - m) ** 2 / v).sum(axis=1)


def fit_support(dataset: Dataset, tree: RegressionTree) -> list:
    """Local affine fit per tree leaf region, with Gaussian weighting
    parameters from the region's sample moments.

    Every region needs at least d + 2 examples for its fit.
    """
    X, y = dataset.inputs, dataset.targets
    d = dataset.input_dim
    regions = []

    def descend(node, idx):
        if isinstance(node, Leaf):
            regions.append(idx)
            return
        mask = X[idx, node.feature] < node.threshold
        descend(node.left, idx[mask])
        descend(node.right, idx[~mask])

    descend(tree.root, np.arange(dataset.n_examples))
    partitions = []
    for k, idx in enumerate(regions):
        if len(idx) < d + 2:
            raise NumericalError(
                f"partition {k} has {len(idx)} examples; the affine fit needs "
                f"at least {d + 2}"
            )
        Xk, yk = X[idx], y[idx]
        means = Xk.mean(axis=0)
        widths = np.maximum(Xk.std(axis=0), WIDTH_FLOOR)
        design = np.column_stack([Xk, np.ones(len(idx))])
        theta, _, _, _ = np.linalg.lstsq(design, yk, rcond=None)
        partitions.append(
            SupportPartition(tuple(means), tuple(widths), Affine(tuple(theta[:d]), float(theta[d])))
        )
    return partitions


def support_predict(partitions, x) -> float:
    return float(batch_support_predict(partitions, np.asarray(x, dtype=float)[None, :])[0])


def batch_support_predict(partitions, inputs) -> np.ndarray:
    if isinstance(inputs, Dataset):
        inputs = inputs.inputs
    X = np.asarray(inputs, dtype=np.float64)
    weights = np.exp(np.column_stack([p.batch_log_weights(X) for p in partitions]))
    values = np.column_stack([_batch_consequent(p.consequent, X) for p in partitions])
    return (normalize_firings(weights) * values).sum(axis=1)
