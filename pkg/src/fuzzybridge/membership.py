"""Scalar membership functions.

Three kinds cover the whole toolkit: Gaussian bumps (used by grid / cluster
rule bases and by the receptive-unit and gate conversions) and the two
complementary sigmoid ramps (used by fuzzified tree splits).

Grades are evaluated in log space where it matters: a rule's firing level is
the product of many clause grades, so the batch kernels accumulate
``log_grade`` terms and exponentiate once.
"""

import math
from dataclasses import dataclass

#: widths produced by fits, inits and gradient steps are clamped to this
WIDTH_FLOOR = 1e-6


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"membership input must be finite, got {x!r}")
    return x


def _stable_sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    p = math.exp(z)
    return p / (1.0 + p)


def _softplus(z: float) -> float:
    # log(1 + e^z) without overflow
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


class MembershipFunction:
    """Base class; concrete kinds implement grade() and log_grade()."""

    kind: str

    def grade(self, x: float) -> float:
        raise NotImplementedError

    def log_grade(self, x: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(MembershipFunction):
    """Bell curve exp(-(x-center)^2 / (2 width^2)); peaks at 1 on the center."""

    center: float
    width: float
    kind = "gaussian"

    def __post_init__(self):
        if not (self.width > 0.0):
            raise ValueError(f"Gaussian width must be > 0, got {self.width}")

    def grade(self, x: float) -> float:
        return math.exp(self.log_grade(x))

    def log_grade(self, x: float) -> float:
        d = _check_finite(x) - self.center
        # denominator written as 2*(w*w) so converted receptive units
        # (which store the squared width) reproduce it bit for bit
        return -(d * d) / (2.0 * (self.width * self.width))


@dataclass(frozen=True)
class SigmoidUp(MembershipFunction):
    """Rising ramp 1 / (1 + exp(-steepness (x - threshold))); 0.5 at the threshold."""

    steepness: float
    threshold: float
    kind = "sigmoid_up"

    def __post_init__(self):
        if not (self.steepness > 0.0):
            raise ValueError(f"sigmoid steepness must be > 0, got {self.steepness}")

    def grade(self, x: float) -> float:
        return _stable_sigmoid(self.steepness * (_check_finite(x) - self.threshold))

    def log_grade(self, x: float) -> float:
        z = self.steepness * (_check_finite(x) - self.threshold)
        return -_softplus(-z)


@dataclass(frozen=True)
class SigmoidDown(MembershipFunction):
    """Falling ramp 1 / (1 + exp(steepness (x - threshold))); 0.5 at the threshold."""

    steepness: float
    threshold: float
    kind = "sigmoid_down"

    def __post_init__(self):
        if not (self.steepness > 0.0):
            raise ValueError(f"sigmoid steepness must be > 0, got {self.steepness}")

    def grade(self, x: float) -> float:
        return _stable_sigmoid(-self.steepness * (_check_finite(x) - self.threshold))

    def log_grade(self, x: float) -> float:
        z = self.steepness * (_check_finite(x) - self.threshold)
        return -_softplus(z)


def gaussian_grid(lo: float, hi: float, count: int) -> list[Gaussian]:
    """Equally spaced Gaussians covering [lo, hi]; width = spacing / 2.

    A single function is centered at the midpoint with width (hi - lo) / 2.
    """
    if not (lo < hi):
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        spacing = hi - lo
        centers = [0.5 * (lo + hi)]
    else:
        spacing = (hi - lo) / (count - 1)
        centers = [lo + i * spacing for i in range(count)]
    width = max(spacing / 2.0, WIDTH_FLOOR)
    return [Gaussian(c, width) for c in centers]
