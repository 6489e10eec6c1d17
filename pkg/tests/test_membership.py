import math

import numpy as np
import pytest

from fuzzybridge.membership import (
    WIDTH_FLOOR,
    Gaussian,
    SigmoidDown,
    SigmoidUp,
    gaussian_grid,
)


class TestGaussian:
    def test_peak_at_center(self):
        assert Gaussian(0.0, 1.0).grade(0.0) == 1.0

    def test_one_sigma_value(self):
        # exp(-(1-0)^2 / (2*1^2)) = exp(-0.5)
        assert Gaussian(0.0, 1.0).grade(1.0) == pytest.approx(math.exp(-0.5), rel=1e-15)

    def test_symmetry(self):
        mf = Gaussian(2.0, 0.7)
        assert mf.grade(2.25) == mf.grade(1.75)

    def test_grade_in_unit_interval(self):
        rng = np.random.default_rng(0)
        mf = Gaussian(0.5, 0.8)
        for x in rng.uniform(-20, 20, 200):
            g = mf.grade(float(x))
            assert 0.0 < g <= 1.0

    def test_log_grade_consistent(self):
        mf = Gaussian(-1.0, 2.0)
        for x in (-3.0, 0.0, 4.5):
            assert math.exp(mf.log_grade(x)) == pytest.approx(mf.grade(x), rel=1e-15)

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            Gaussian(0.0, 0.0)
        with pytest.raises(ValueError):
            Gaussian(0.0, -1.0)

    def test_non_finite_input(self):
        mf = Gaussian(0.0, 1.0)
        with pytest.raises(ValueError):
            mf.grade(math.nan)
        with pytest.raises(ValueError):
            mf.grade(math.inf)


class TestSigmoids:
    def test_up_midpoint(self):
        assert SigmoidUp(2.0, 5.0).grade(5.0) == 0.5

    def test_down_midpoint(self):
        assert SigmoidDown(2.0, 5.0).grade(5.0) == 0.5

    def test_up_monotone(self):
        mf = SigmoidUp(3.0, 0.0)
        xs = np.linspace(-4, 4, 50)
        grades = [mf.grade(float(x)) for x in xs]
        assert all(a < b for a, b in zip(grades, grades[1:]))

    def test_complementary(self):
        up = SigmoidUp(1.7, 0.3)
        down = SigmoidDown(1.7, 0.3)
        for x in np.linspace(-5, 5, 41):
            assert up.grade(float(x)) + down.grade(float(x)) == pytest.approx(1.0, abs=1e-15)

    def test_open_interval(self):
        rng = np.random.default_rng(1)
        up = SigmoidUp(2.5, -1.0)
        for x in rng.uniform(-10, 10, 200):
            g = up.grade(float(x))
            assert 0.0 < g < 1.0

    def test_log_grade_consistent(self):
        up = SigmoidUp(2.0, 1.0)
        down = SigmoidDown(2.0, 1.0)
        for x in (-40.0, -1.0, 1.0, 3.0, 40.0):
            assert math.exp(up.log_grade(x)) == pytest.approx(up.grade(x), rel=1e-14)
            assert math.exp(down.log_grade(x)) == pytest.approx(down.grade(x), rel=1e-14)

    def test_invalid_steepness(self):
        with pytest.raises(ValueError):
            SigmoidUp(0.0, 1.0)
        with pytest.raises(ValueError):
            SigmoidDown(-2.0, 1.0)

    def test_non_finite_input(self):
        with pytest.raises(ValueError):
            SigmoidUp(1.0, 0.0).grade(math.nan)


class TestGaussianGrid:
    def test_two_point_grid(self):
        grid = gaussian_grid(0.0, 1.0, 2)
        assert [mf.center for mf in grid] == [0.0, 1.0]
        assert all(mf.width == 0.5 for mf in grid)

    def test_single_function(self):
        (mf,) = gaussian_grid(-2.0, 2.0, 1)
        assert mf.center == 0.0
        assert mf.width == 2.0

    def test_width_floor(self):
        grid = gaussian_grid(0.0, 1e-9, 2)
        assert all(mf.width == WIDTH_FLOOR for mf in grid)

    def test_bad_range(self):
        with pytest.raises(ValueError):
            gaussian_grid(1.0, 0.0, 3)
