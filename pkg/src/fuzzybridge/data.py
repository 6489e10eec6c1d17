"""Datasets: CSV ingestion, synthetic generators, splitting, standardization.

Synthetic noise is additive Gaussian drawn from numpy's default generator
(PCG64 + ziggurat normal), seeded explicitly, so every fixture in the test
suite is reproducible by seed alone.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

GENERATORS = ("sinc2d", "friedman1", "piecewise_linear", "step")

# the two planted regimes of the piecewise_linear generator, as
# (slope, intercept); the regime boundary sits at x0 = 0.5
PIECEWISE_LEFT = (2.0, 1.0)
PIECEWISE_RIGHT = (-3.0, 4.0)

_DEFAULT_RANGES = {
    "sinc2d": ((-10.0, 10.0), (-10.0, 10.0)),
    "friedman1": ((0.0, 1.0),) * 5,
    "piecewise_linear": ((0.0, 1.0),),
    "step": ((0.0, 1.0),),
}


@dataclass(frozen=True)
class Dataset:
    """An (N, d) input matrix with N scalar targets; immutable once built.

    N = 0 is tolerated structurally (an empty split) but every fit rejects it.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64)
        targets = np.array(self.targets, dtype=np.float64)
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-d, got shape {inputs.shape}")
        if targets.ndim != 1 or targets.shape[0] != inputs.shape[0]:
            raise ValueError(
                f"targets shape {targets.shape} does not match {inputs.shape[0]} rows"
            )
        if inputs.size and not np.all(np.isfinite(inputs)):
            raise ValueError("inputs contain non-finite entries")
        if targets.size and not np.all(np.isfinite(targets)):
            raise ValueError("targets contain non-finite entries")
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def n_examples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(self.inputs[indices], self.targets[indices])


@dataclass(frozen=True)
class DataSpec:
    """Recipe for a synthetic dataset."""

    generator: str
    n: int
    noise_sd: float = 0.0
    seed: int = 0
    ranges: tuple | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


def load_csv(path) -> Dataset:
    """Read a header-first CSV; last column is the target, the rest features."""
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least 2 columns (features + target)")
        width = len(header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DataError(f"{path}: row {line_no} has {len(row)} cells, expected {width}")
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {line_no}, column {header[col]!r}: not a number: {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {line_no}, column {header[col]!r}: non-finite value {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(arr[:, :-1], arr[:, -1])


def save_csv(dataset: Dataset, path, feature_names=None) -> None:
    """Write a dataset back out; floats use repr so a reload is value-exact."""
    d = dataset.input_dim
    names = list(feature_names) if feature_names else [f"x{i}" for i in range(d)]
    if len(names) != d:
        raise ValueError(f"expected {d} feature names, got {len(names)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["y"])
        for row, target in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def _sinc(v):
    out = np.ones_like(v)
    nz = v != 0.0
    out[nz] = np.sin(v[nz]) / v[nz]
    return out


def generate(spec: DataSpec) -> Dataset:
    """Build the synthetic dataset described by ``spec``.

    sinc2d places inputs on a sqrt(n) x sqrt(n) grid when n is a perfect
    square (otherwise uniform random); step uses an evenly spaced grid so
    "one grid step" is well defined; the rest draw uniform inputs.
    """
    rng = np.random.default_rng(spec.seed)
    ranges = spec.ranges or _DEFAULT_RANGES[spec.generator]
    for lo, hi in ranges:
        if not lo < hi:
            raise ValueError(f"bad range ({lo}, {hi})")

    if spec.generator == "sinc2d":
        if len(ranges) != 2:
            raise ValueError("sinc2d takes exactly 2 ranges")
        side = math.isqrt(spec.n)
        if side * side == spec.n:
            g0 = np.linspace(ranges[0][0], ranges[0][1], side)
            g1 = np.linspace(ranges[1][0], ranges[1][1], side)
            a, b = np.meshgrid(g0, g1, indexing="ij")
            X = np.column_stack([a.ravel(), b.ravel()])
        else:
            X = np.column_stack(
                [rng.uniform(lo, hi, spec.n) for lo, hi in ranges]
            )
        y = _sinc(X[:, 0]) * _sinc(X[:, 1])
    elif spec.generator == "friedman1":
        if len(ranges) != 5:
            raise ValueError("friedman1 takes exactly 5 ranges")
        X = np.column_stack([rng.uniform(lo, hi, spec.n) for lo, hi in ranges])
        y = (
            10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4]
        )
    elif spec.generator == "piecewise_linear":
        if len(ranges) != 1:
            raise ValueError("piecewise_linear takes exactly 1 range")
        X = rng.uniform(ranges[0][0], ranges[0][1], spec.n)[:, None]
        left = X[:, 0] < 0.5
        y = np.where(
            left,
            PIECEWISE_LEFT[0] * X[:, 0] + PIECEWISE_LEFT[1],
            PIECEWISE_RIGHT[0] * X[:, 0] + PIECEWISE_RIGHT[1],
        )
    else:  # step
        if len(ranges) != 1:
            raise ValueError("step takes exactly 1 range")
        X = np.linspace(ranges[0][0], ranges[0][1], spec.n)[:, None]
        y = (X[:, 0] >= 0.5).astype(np.float64)

    if spec.noise_sd > 0.0:
        y = y + rng.normal(0.0, spec.noise_sd, spec.n)
    return Dataset(X, y)


def split(dataset: Dataset, test_fraction: float, seed: int):
    """Disjoint, exhaustive (train, test) partition by a seeded shuffle."""
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError("test_fraction must be in [0, 1]")
    n = dataset.n_examples
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)


@dataclass(frozen=True)
class FeatureTransform:
    """Per-feature affine transform (x - mean) / sd, invertible exactly."""

    means: np.ndarray
    sds: np.ndarray

    def apply(self, dataset: Dataset) -> Dataset:
        return Dataset((dataset.inputs - self.means) / self.sds, dataset.targets)

    def invert(self, dataset: Dataset) -> Dataset:
        return Dataset(dataset.inputs * self.sds + self.means, dataset.targets)


def standardize(train: Dataset, test: Dataset):
    """Standardize features using train statistics only.

    Returns (train', test', transform). Zero-variance features keep sd 1 so
    the transform stays invertible. Targets are left untouched.
    """
    if train.n_examples < 1:
        raise ValueError("cannot standardize an empty training set")
    means = train.inputs.mean(axis=0)
    sds = train.inputs.std(axis=0)
    sds = np.where(sds > 0.0, sds, 1.0)
    transform = FeatureTransform(means, sds)
    return transform.apply(train), transform.apply(test), transform
