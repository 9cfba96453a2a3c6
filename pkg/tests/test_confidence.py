"""Oracle, property, and coverage tests for the exact binomial bounds.

CP_LOWER_TABLE frozen from tests/make_oracle_tables.py: each entry was
found by bisecting the exact binomial tail P(Bin(n, p) >= x) = a in
mpmath, independently of the Beta-quantile identity the implementation
uses.
"""

import numpy as np
import pytest

from smoothcert.confidence import (
    ProbBounds,
    cp_lower,
    cp_upper,
    double_sampling_bounds,
)

CP_LOWER_TABLE = [
    (990, 1000, 0.0005, 0.97493656685836728),
    (7, 10, 0.05, 0.39337578389458658),
    (1, 50, 0.01, 0.00020098651657337637),
    (100, 100, 0.001, 0.93325430079699104),
]


class TestCpLower:
    @pytest.mark.parametrize("x,n,a,expected", CP_LOWER_TABLE)
    def test_binomial_tail_oracle(self, x, n, a, expected):
        assert cp_lower(x, n, a) == pytest.approx(expected, abs=1e-6)

    def test_zero_count(self):
        assert cp_lower(0, 10, 0.05) == 0.0
        assert cp_lower(0, 100_000, 0.001) == 0.0

    def test_full_count_closed_form(self):
        assert cp_lower(100, 100, 0.001) == pytest.approx(0.001 ** (1.0 / 100.0), abs=1e-12)

    def test_monotone_in_x(self):
        x = np.arange(0, 201)
        bounds = cp_lower(x, 200, 0.01)
        assert np.all(np.diff(bounds) > 0.0)

    def test_below_empirical_ratio(self):
        """cp_lower(x, n, a) < x/n strictly for interior counts."""
        rng = np.random.default_rng(47)
        n = rng.integers(10, 5000, 300)
        x = (n * rng.uniform(0.05, 0.95, 300)).astype(np.int64)
        x = np.clip(x, 1, n - 1)
        a = rng.uniform(0.0005, 0.1, 300)
        assert np.all(cp_lower(x, n, a) < x / n)

    def test_coverage(self):
        """Violation rate of {cp_lower > p} stays within a + 3 sqrt(a / m)
        over m = 1e4 simulated binomials at several true p."""
        rng = np.random.default_rng(53)
        m, n, a = 10_000, 1000, 0.001
        for p in (0.6, 0.9, 0.99):
            draws = rng.binomial(n, p, size=m)
            bounds = cp_lower(draws, n, a)
            rate = float(np.mean(bounds > p))
            assert rate <= a + 3.0 * np.sqrt(a / m)

    def test_domain(self):
        with pytest.raises(ValueError):
            cp_lower(5, 4, 0.05)
        with pytest.raises(ValueError):
            cp_lower(-1, 4, 0.05)
        with pytest.raises(ValueError):
            cp_lower(2, 4, 0.0)


class TestCpUpper:
    def test_full_count(self):
        assert cp_upper(10, 10, 0.01) == 1.0

    def test_zero_count_closed_form(self):
        assert cp_upper(0, 100, 0.001) == pytest.approx(1.0 - 0.001 ** (1.0 / 100.0), abs=1e-12)

    def test_mirror_identity(self):
        rng = np.random.default_rng(59)
        n = rng.integers(5, 2000, 200)
        x = (n * rng.uniform(0.0, 1.0, 200)).astype(np.int64)
        a = rng.uniform(0.001, 0.2, 200)
        np.testing.assert_allclose(
            cp_upper(x, n, a), 1.0 - cp_lower(n - x, n, a), atol=1e-14
        )

    def test_brackets_empirical_ratio(self):
        rng = np.random.default_rng(61)
        n = 500
        x = rng.integers(0, n + 1, 300)
        lo = cp_lower(x, n, 0.01)
        hi = cp_upper(x, n, 0.01)
        ratio = x / n
        assert np.all(lo <= ratio)
        assert np.all(ratio <= hi)


class TestDoubleSamplingBounds:
    def test_closed_form_at_full_counts(self):
        b = double_sampling_bounds(100, 100, 100, 0.001)
        assert b.pA_low == pytest.approx(0.92680784245582996, abs=1e-12)
        assert b.qA_low == pytest.approx(0.92040591305507540, abs=1e-12)
        assert b.qA_high == 1.0

    def test_zero_p_count_abstains(self):
        b = double_sampling_bounds(0, 50, 100, 0.001)
        assert b.pA_low == 0.0

    def test_bounds_bracket_ratios(self):
        rng = np.random.default_rng(67)
        for _ in range(50):
            n = int(rng.integers(10, 20_000))
            cp = int(rng.integers(0, n + 1))
            cq = int(rng.integers(0, n + 1))
            b = double_sampling_bounds(cp, cq, n, 0.001)
            assert b.pA_low <= cp / n
            assert b.qA_low <= cq / n <= b.qA_high

    def test_probbounds_validation(self):
        with pytest.raises(ValueError):
            ProbBounds(pA_low=0.5, qA_low=0.9, qA_high=0.2, alpha=0.001, N=10)
