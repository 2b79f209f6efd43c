import numpy as np
import pytest
import scipy.stats

from mpvmc.errors import DegenerateInputError
from mpvmc.normality import shapiro_wilk, standardize


class TestShapiroWilk:
    def test_normal_sample_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=500)
        report = shapiro_wilk(x)
        assert report.w >= 0.99
        reference = scipy.stats.shapiro(x).statistic
        assert report.w == pytest.approx(reference, abs=2e-4)

    def test_uniform_sample_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=500)
        report = shapiro_wilk(x)
        assert report.w <= 0.96
        reference = scipy.stats.shapiro(x).statistic
        assert report.w == pytest.approx(reference, abs=2e-4)

    def test_against_scipy_across_sizes(self):
        rng = np.random.default_rng(2)
        for n in (3, 4, 5, 6, 11, 25, 100, 1200, 5000):
            x = rng.normal(size=n)
            mine = shapiro_wilk(x).w
            reference = scipy.stats.shapiro(x).statistic
            assert mine == pytest.approx(reference, abs=5e-4), n

    def test_constant_input_raises(self):
        with pytest.raises(DegenerateInputError):
            shapiro_wilk(np.ones(10))

    def test_size_guard(self):
        with pytest.raises(ValueError):
            shapiro_wilk(np.arange(2))
        with pytest.raises(ValueError):
            shapiro_wilk(np.random.default_rng(0).normal(size=5001))

    def test_affine_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=200)
        w = shapiro_wilk(x).w
        assert shapiro_wilk(3.5 * x - 12.0).w == pytest.approx(w, abs=1e-10)

    def test_reports_moments(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=2000)
        skew, kurt = shapiro_wilk(x).standardized_moments
        assert abs(skew) < 0.2
        assert abs(kurt) < 0.4


class TestStandardize:
    def test_two_points(self):
        assert standardize([0.0, 2.0]).tolist() == [-1.0, 1.0]

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=100)
        z = standardize(x)
        assert np.allclose(standardize(z), z, atol=1e-12)
        assert abs(z.mean()) <= 1e-12
        assert abs(z.std() - 1.0) <= 1e-12

    def test_affine_collapse(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=100)
        assert np.allclose(standardize(7.0 * x + 3.0), standardize(x), atol=1e-12)

    def test_constant_raises(self):
        with pytest.raises(DegenerateInputError):
            standardize(np.zeros(5))
