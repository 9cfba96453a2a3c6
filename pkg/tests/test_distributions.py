"""Oracle and property tests for the noise radial/angular laws.

Tables frozen from tests/make_oracle_tables.py (mpmath, 60 digits).
"""

import math

import numpy as np
import pytest

from smoothcert.distributions import (
    NoiseSpec,
    angular_cdf,
    radial_cdf,
    radial_log_density,
    radial_quantile,
    sample_noise,
    _sample_noise_batch,
)

RADIAL_LOG_DENSITY_TABLE = [
    (1.0, 0, 3, 1.0, -3.2568155996140182),
    (0.5, 380, 784, 2.0, 919.87648699926759),
    (0.5, 380, 784, 2.857738033247041, 648.39012720863251),
    (0.5, 380, 784, 5.0, 222.20981648919545),
    (0.25, 2, 6, 0.7, -1.6401801148882657),
]

RADIAL_CDF_TABLE = [
    (1.0, 0, 4, 2.0, 0.59399415029016192),
    (0.5, 380, 784, 2.0, 7.7513122831782445e-17),
    (0.5, 380, 784, 2.8, 2.0062748527459938e-13),
    (0.5, 380, 784, 3.5, 3.3141353199586688e-11),
    (0.5, 120, 256, 1.0, 1.3229345143345166e-12),
]

RADIAL_QUANTILE_TABLE = [
    (0.5, 380, 784, 0.5, 13.805189778958654),
    (1.0, 0, 16, 0.9, 4.8519922632972234),
    (0.5, 380, 784, 0.999, 20.444034545931698),
]

ANGULAR_CDF_TABLE = [
    (3, 0.5, 0.75000000000000000),
    (5, 0.3, 0.71824999999999999),
    (2, 0.7, 0.74681668889336500),
    (784, 0.1, 0.99747911342323096),
    (784, -0.05, 0.080826206660564304),
    (4096, 0.02, 0.89970872328010853),
]


def _spec(sigma, k, d):
    if k == 0:
        return NoiseSpec.standard(sigma, d)
    return NoiseSpec.general(sigma, k, d)


class TestNoiseSpec:
    def test_sigma_prime_arithmetic(self):
        """sigma_prime = sqrt(d / (d - 2k)) * sigma; 784/380/0.5 -> sqrt(784/24)/2."""
        spec = NoiseSpec.general(0.5, 380, 784)
        assert spec.sigma_prime == pytest.approx(math.sqrt(784.0 / 24.0) * 0.5, rel=1e-15)
        assert spec.sigma_prime == pytest.approx(2.857738033247041, abs=1e-12)

    def test_standard_requires_k_zero(self):
        with pytest.raises(ValueError):
            NoiseSpec(kind="standard-gaussian", sigma=1.0, k=2, d=10)
        assert NoiseSpec.standard(1.0, 10).sigma_prime == 1.0

    def test_general_requires_2k_below_d(self):
        with pytest.raises(ValueError):
            NoiseSpec.general(1.0, 128, 256)
        with pytest.raises(ValueError):
            NoiseSpec.general(1.0, 200, 256)
        assert NoiseSpec.general(1.0, 127, 256).sigma_prime > 1.0

    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            NoiseSpec.standard(-1.0, 10)
        with pytest.raises(ValueError):
            NoiseSpec.standard(1.0, 1)
        with pytest.raises(ValueError):
            NoiseSpec(kind="laplace", sigma=1.0, k=0, d=10)


class TestRadialLogDensity:
    @pytest.mark.parametrize("sigma,k,d,t,expected", RADIAL_LOG_DENSITY_TABLE)
    def test_oracle_values(self, sigma, k, d, t, expected):
        assert radial_log_density(_spec(sigma, k, d), t) == pytest.approx(
            expected, rel=1e-12, abs=1e-12
        )

    def test_strictly_decreasing(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            d = int(rng.integers(2, 1000))
            k = int(rng.integers(0, (d - 1) // 2 + 1))
            sigma = float(rng.uniform(0.1, 3.0))
            spec = _spec(sigma, k, d)
            t = np.sort(rng.uniform(1e-3, 6.0 * spec.sigma_prime, 200))
            vals = radial_log_density(spec, t)
            assert np.all(np.diff(vals) < 0.0)

    def test_k_zero_matches_standard(self):
        t = np.linspace(0.05, 8.0, 300)
        std = radial_log_density(NoiseSpec.standard(1.3, 12), t)
        gen = radial_log_density(NoiseSpec.general(1.3, 0, 12), t)
        np.testing.assert_allclose(std, gen, atol=1e-12)

    def test_pole_rejected(self):
        with pytest.raises(ValueError):
            radial_log_density(NoiseSpec.general(1.0, 3, 10), 0.0)
        # finite mode value for k = 0
        assert np.isfinite(radial_log_density(NoiseSpec.standard(1.0, 4), 0.0))


class TestRadialCdf:
    @pytest.mark.parametrize("sigma,k,d,t,expected", RADIAL_CDF_TABLE)
    def test_oracle_values(self, sigma, k, d, t, expected):
        assert radial_cdf(_spec(sigma, k, d), t) == pytest.approx(
            expected, rel=1e-10, abs=1e-22
        )

    def test_d2_closed_form(self):
        """In two dimensions the squared radius is exponential: F(t) = 1 - exp(-t^2/2s^2)."""
        sigma = 0.8
        spec = NoiseSpec.standard(sigma, 2)
        assert radial_cdf(spec, sigma * math.sqrt(2.0 * math.log(2.0))) == pytest.approx(0.5, abs=1e-14)
        t = np.linspace(0.0, 5.0, 100)
        np.testing.assert_allclose(
            radial_cdf(spec, t), 1.0 - np.exp(-t * t / (2 * sigma * sigma)), atol=1e-14
        )

    def test_zero_and_limits(self):
        spec = NoiseSpec.general(0.5, 380, 784)
        assert radial_cdf(spec, 0.0) == 0.0
        assert radial_cdf(spec, 100.0) == pytest.approx(1.0, abs=1e-12)
        t = np.linspace(0.0, 30.0, 400)
        assert np.all(np.diff(radial_cdf(spec, t)) >= 0.0)


class TestRadialQuantile:
    @pytest.mark.parametrize("sigma,k,d,p,expected", RADIAL_QUANTILE_TABLE)
    def test_oracle_values(self, sigma, k, d, p, expected):
        assert radial_quantile(_spec(sigma, k, d), p) == pytest.approx(expected, abs=1e-8)

    def test_round_trip(self):
        """cdf(quantile(p)) = p to 1e-10 over specs of both kinds."""
        rng = np.random.default_rng(29)
        specs = [
            NoiseSpec.standard(1.0, 2),
            NoiseSpec.standard(0.25, 64),
            NoiseSpec.general(0.5, 380, 784),
            NoiseSpec.general(1.0, 120, 256),
            NoiseSpec.general(0.5, 2040, 4096),
        ]
        for spec in specs:
            p = rng.uniform(1e-6, 1.0 - 1e-6, 100)
            np.testing.assert_allclose(radial_cdf(spec, radial_quantile(spec, p)), p, atol=1e-10)

    def test_small_p_goes_to_zero(self):
        # F(t) ~ t^d near zero, so the decay toward 0 is slow but monotone
        spec = NoiseSpec.standard(1.0, 6)
        q = [radial_quantile(spec, p) for p in (1e-3, 1e-6, 1e-12)]
        assert q[0] > q[1] > q[2] > 0.0
        assert q[2] < 0.05

    def test_domain(self):
        spec = NoiseSpec.standard(1.0, 4)
        with pytest.raises(ValueError):
            radial_quantile(spec, 0.0)
        with pytest.raises(ValueError):
            radial_quantile(spec, 1.0)


class TestAngularCdf:
    @pytest.mark.parametrize("d,c,expected", ANGULAR_CDF_TABLE)
    def test_oracle_values(self, d, c, expected):
        assert angular_cdf(d, c) == pytest.approx(expected, abs=5e-12)

    def test_symmetry_and_endpoints(self):
        rng = np.random.default_rng(31)
        for d in (2, 3, 17, 784, 4096):
            c = rng.uniform(-1.0, 1.0, 300)
            np.testing.assert_allclose(
                angular_cdf(d, c) + angular_cdf(d, -c), 1.0, atol=1e-12
            )
            assert angular_cdf(d, -1.0) == 0.0
            assert angular_cdf(d, 1.0) == 1.0
            assert angular_cdf(d, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_d3_is_uniform(self):
        c = np.linspace(-1.0, 1.0, 101)
        np.testing.assert_allclose(angular_cdf(3, c), (1.0 + c) / 2.0, atol=1e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            angular_cdf(3, 1.5)
        with pytest.raises(ValueError):
            angular_cdf(1, 0.0)


class TestSampleNoise:
    def test_mean_squared_norm(self):
        """E||eps||^2 = d sigma^2 regardless of k."""
        rng = np.random.default_rng(37)
        spec = NoiseSpec.standard(1.0, 16)
        samples = _sample_noise_batch(spec, rng, 100_000)
        mean_sq = float(np.mean(np.sum(samples**2, axis=1)))
        assert abs(mean_sq - 16.0) < 0.5

    def test_k_zero_stream_identity(self):
        """general k=0 must consume the generator identically to standard."""
        a = sample_noise(NoiseSpec.standard(0.7, 32), np.random.default_rng(99))
        b = sample_noise(NoiseSpec.general(0.7, 0, 32), np.random.default_rng(99))
        np.testing.assert_array_equal(a, b)

    def test_radial_law_matches_cdf(self):
        """KS statistic between empirical radii and radial_cdf below 0.01 at N=1e5."""
        rng = np.random.default_rng(41)
        spec = NoiseSpec.general(0.5, 380, 784)
        radii = np.sort(np.linalg.norm(_sample_noise_batch(spec, rng, 100_000), axis=1))
        n = radii.size
        theo = radial_cdf(spec, radii)
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        ks = max(np.max(np.abs(empirical_hi - theo)), np.max(np.abs(theo - empirical_lo)))
        assert ks < 0.01

    def test_direction_is_uniform(self):
        """First-coordinate cosine of sampled directions follows angular_cdf."""
        rng = np.random.default_rng(43)
        spec = NoiseSpec.standard(1.0, 8)
        samples = _sample_noise_batch(spec, rng, 50_000)
        cosines = np.sort(samples[:, 0] / np.linalg.norm(samples, axis=1))
        theo = angular_cdf(8, cosines)
        empirical = np.arange(1, cosines.size + 1) / cosines.size
        assert np.max(np.abs(empirical - theo)) < 0.012

    def test_single_draw_shape(self):
        eps = sample_noise(NoiseSpec.standard(1.0, 5), np.random.default_rng(0))
        assert eps.shape == (5,)
