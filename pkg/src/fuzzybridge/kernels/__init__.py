"""Batched antecedent kernels with a compiled fast path.

Every trainer and verifier in the toolkit bottoms out in the same loop:
evaluate the firing level of K rules on N inputs. The loop lives here, once,
behind :func:`batch_log_firings`. At import time the Cython extension is
preferred; when the build artifact is absent the NumPy fallback is selected
so the package stays importable from a plain source tree.

``fuzzybridge.kernels.BACKEND`` reports which implementation is active;
benchmarks/bench_kernels.py times the two against each other.
"""

from dataclasses import dataclass

import numpy as np

from ..membership import Gaussian, SigmoidDown, SigmoidUp
from . import fallback

try:  # pragma: no cover - exercised only when the extension is built
    from . import _speedups
except ImportError:  # pragma: no cover
    _speedups = None

BACKEND = "compiled" if _speedups is not None else "numpy"

GAUSSIAN = fallback.GAUSSIAN
SIGMOID_UP = fallback.SIGMOID_UP
SIGMOID_DOWN = fallback.SIGMOID_DOWN


@dataclass(frozen=True)
class PackedAntecedents:
    """CSR layout of every rule's clauses, ready for the batch kernels."""

    n_rules: int
    rule_ptr: np.ndarray  # int32, K+1 offsets
    feature: np.ndarray  # int32 per clause
    kind: np.ndarray  # int32 per clause
    p0: np.ndarray  # float64: center / threshold
    p1: np.ndarray  # float64: 2*width^2 / steepness


def pack_antecedents(antecedents) -> PackedAntecedents:
    """Flatten a sequence of antecedents into the packed kernel layout."""
    rule_ptr = [0]
    feature, kind, p0, p1 = [], [], [], []
    for ant in antecedents:
        for clause in ant.clauses:
            mf = clause.mf
            feature.append(clause.feature)
            if isinstance(mf, Gaussian):
                kind.append(GAUSSIAN)
                p0.append(mf.center)
                p1.append(2.0 * (mf.width * mf.width))
            elif isinstance(mf, SigmoidUp):
                kind.append(SIGMOID_UP)
                p0.append(mf.threshold)
                p1.append(mf.steepness)
            elif isinstance(mf, SigmoidDown):
                kind.append(SIGMOID_DOWN)
                p0.append(mf.threshold)
                p1.append(mf.steepness)
            else:
                raise TypeError(f"unsupported membership function: {type(mf).__name__}")
        rule_ptr.append(len(feature))
    return PackedAntecedents(
        n_rules=len(rule_ptr) - 1,
        rule_ptr=np.asarray(rule_ptr, dtype=np.int32),
        feature=np.asarray(feature, dtype=np.int32),
        kind=np.asarray(kind, dtype=np.int32),
        p0=np.asarray(p0, dtype=np.float64),
        p1=np.asarray(p1, dtype=np.float64),
    )


def batch_log_firings(packed: PackedAntecedents, X, backend: str | None = None):
    """(N, K) log firing levels for packed antecedents on input rows X."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d input matrix, got shape {X.shape}")
    impl = backend or BACKEND
    if impl == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled kernel backend is not available")
        return _speedups.batch_log_firings(
            X, packed.rule_ptr, packed.feature, packed.kind, packed.p0, packed.p1
        )
    return fallback.batch_log_firings(
        X, packed.rule_ptr, packed.feature, packed.kind, packed.p0, packed.p1
    )
