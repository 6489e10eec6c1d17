"""NumPy implementation of the batched antecedent kernels.

Mirrors the compiled extension operation for operation; clause terms are
accumulated in the same order so the two backends agree to rounding.
"""

import numpy as np

GAUSSIAN = 0
SIGMOID_UP = 1
SIGMOID_DOWN = 2


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def batch_log_firings(X, rule_ptr, feature, kind, p0, p1):
    """Log firing level of every rule at every input row.

    X is (N, d); clause arrays are CSR-packed per rule (rule_ptr has K+1
    offsets). Parameter meaning by kind: Gaussian p0=center, p1=2*width^2;
    sigmoids p0=threshold, p1=steepness. Returns (N, K); an empty clause
    range (vacuous antecedent) yields log 1 = 0.
    """
    n = X.shape[0]
    n_rules = rule_ptr.shape[0] - 1
    out = np.zeros((n, n_rules))
    for k in range(n_rules):
        acc = out[:, k]
        for j in range(rule_ptr[k], rule_ptr[k + 1]):
            xi = X[:, feature[j]]
            if kind[j] == GAUSSIAN:
                d = xi - p0[j]
                acc -= (d * d) / p1[j]
            elif kind[j] == SIGMOID_UP:
                acc -= _softplus(-p1[j] * (xi - p0[j]))
            else:
                acc -= _softplus(p1[j] * (xi - p0[j]))
    return out
