"""Radial and angular laws of the isotropic smoothing distributions.

Smoothing noise is isotropic, so every quantity the certifier needs
reduces to two one-dimensional laws: the law of the radius ``t = ||z||``
and the law of the direction cosine between a uniform sphere direction
and a fixed axis.  Both are exact here (no sampling, no asymptotics):
the squared radius over sigma_prime**2 follows a gamma law with shape
d/2 - k and scale 2, and the squared direction cosine follows a
Beta(1/2, (d-1)/2) law.

Densities are exposed on log scale only; at d in the thousands the
linear-scale density under- and overflows, and every downstream
comparison happens in log space anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _special

STANDARD_GAUSSIAN = "standard-gaussian"
GENERAL_GAUSSIAN = "general-gaussian"

_KINDS = (STANDARD_GAUSSIAN, GENERAL_GAUSSIAN)


@dataclass(frozen=True)
class NoiseSpec:
    """An isotropic noise distribution in d dimensions.

    ``kind`` is "standard-gaussian" (k must be 0) or "general-gaussian",
    whose density is proportional to ||z||**(-2k) * exp(-||z||^2 / (2 sigma_prime^2))
    with sigma_prime = sqrt(d / (d - 2k)) * sigma.  The sigma_prime field
    is derived; callers supply kind, sigma, k, d only.
    """

    kind: str
    sigma: float
    k: int
    d: int
    sigma_prime: float = field(init=False)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind: {self.kind!r}")
        if not (isinstance(self.d, int) and self.d >= 2):
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        if not (isinstance(self.k, int) and self.k >= 0):
            raise ValueError(f"k must be an integer >= 0, got {self.k!r}")
        if not (isinstance(self.sigma, (int, float)) and math.isfinite(self.sigma)
                and self.sigma > 0):
            raise ValueError(f"sigma must be a finite positive real, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.kind == STANDARD_GAUSSIAN:
            if self.k != 0:
                raise ValueError("standard-gaussian requires k = 0")
            object.__setattr__(self, "sigma_prime", self.sigma)
        else:
            if 2 * self.k >= self.d:
                raise ValueError(
                    f"general-gaussian requires 2k < d, got k={self.k}, d={self.d}"
                )
            object.__setattr__(
                self, "sigma_prime", math.sqrt(self.d / (self.d - 2 * self.k)) * self.sigma
            )

    @classmethod
    def standard(cls, sigma: float, d: int) -> "NoiseSpec":
        return cls(kind=STANDARD_GAUSSIAN, sigma=sigma, k=0, d=d)

    @classmethod
    def general(cls, sigma: float, k: int, d: int) -> "NoiseSpec":
        return cls(kind=GENERAL_GAUSSIAN, sigma=sigma, k=k, d=d)

    @property
    def gamma_shape(self) -> float:
        """Shape of the gamma law followed by R^2 / sigma_prime^2 (scale 2)."""
        return 0.5 * self.d - self.k


def _log_norm_const(spec: NoiseSpec) -> float:
    # ln C for f(z) = C * ||z||^(-2k) * exp(-||z||^2 / (2 s'^2)), integrating
    # over R^d:  C = Gamma(d/2) / (pi^(d/2) * (2 s'^2)^((d-2k)/2) * Gamma((d-2k)/2))
    half_d = 0.5 * spec.d
    a = spec.gamma_shape
    return (
        _special.log_gamma(half_d)
        - half_d * math.log(math.pi)
        - a * math.log(2.0 * spec.sigma_prime**2)
        - _special.log_gamma(a)
    )


def radial_log_density(spec: NoiseSpec, t: object) -> np.ndarray | float:
    """Log of the d-dimensional density at any point of norm t.

    Strictly decreasing in t.  t = 0 is a pole when k > 0 and is rejected;
    for k = 0 it evaluates to the (finite) mode value.
    """
    ta = np.asarray(t, dtype=np.float64)
    scalar = ta.ndim == 0
    ta = np.atleast_1d(ta)
    if not np.all(np.isfinite(ta)) or np.any(ta < 0.0):
        raise ValueError("radial_log_density requires finite t >= 0")
    if spec.k > 0 and np.any(ta == 0.0):
        raise ValueError("t = 0 is a density pole when k > 0")
    with np.errstate(divide="ignore"):
        log_t = np.log(ta)
    power = -2.0 * spec.k * log_t if spec.k > 0 else np.zeros_like(ta)
    out = _log_norm_const(spec) + power - ta * ta / (2.0 * spec.sigma_prime**2)
    return float(out.reshape(())) if scalar else out


def radial_cdf(spec: NoiseSpec, t: object) -> np.ndarray | float:
    """P(||z|| <= t): regularized lower incomplete gamma at t^2 / (2 sigma_prime^2)."""
    ta = np.asarray(t, dtype=np.float64)
    scalar = ta.ndim == 0
    ta = np.atleast_1d(ta)
    if not np.all(np.isfinite(ta)) or np.any(ta < 0.0):
        raise ValueError("radial_cdf requires finite t >= 0")
    out = np.atleast_1d(
        _special.reg_gamma_p(spec.gamma_shape, ta * ta / (2.0 * spec.sigma_prime**2))
    )
    return float(out.reshape(())) if scalar else out


def radial_quantile(spec: NoiseSpec, p: object) -> np.ndarray | float:
    """Inverse of radial_cdf on (0, 1), by bracketed bisection."""
    pa = np.asarray(p, dtype=np.float64)
    scalar = pa.ndim == 0
    pa = np.atleast_1d(pa)
    if np.any(pa <= 0.0) or np.any(pa >= 1.0) or not np.all(np.isfinite(pa)):
        raise ValueError("radial_quantile requires 0 < p < 1")
    hi = spec.sigma_prime * (math.sqrt(spec.d) + 10.0)
    p_max = float(np.max(pa))
    while radial_cdf(spec, hi) < p_max:
        hi *= 2.0
    out = _special.bisect_increasing(
        lambda t: np.atleast_1d(radial_cdf(spec, t)),
        np.zeros(pa.shape),
        np.full(pa.shape, hi),
        pa,
    )
    return float(out.reshape(())) if scalar else out


def angular_cdf(d: int, c: object) -> np.ndarray | float:
    """P(u_1 <= c) for a uniform direction u on the unit sphere in d dims.

    The squared coordinate u_1^2 follows Beta(1/2, (d-1)/2); the CDF is
    assembled from the regularized incomplete beta by symmetry.
    """
    if not (isinstance(d, (int, np.integer)) and d >= 2):
        raise ValueError(f"angular_cdf requires integer d >= 2, got {d!r}")
    ca = np.asarray(c, dtype=np.float64)
    scalar = ca.ndim == 0
    ca = np.atleast_1d(ca)
    if np.any(ca < -1.0) or np.any(ca > 1.0) or not np.all(np.isfinite(ca)):
        raise ValueError("angular_cdf requires c in [-1, 1]")
    half_mass = 0.5 * np.atleast_1d(_special.reg_beta(0.5, (d - 1) / 2.0, ca * ca))
    out = np.where(ca >= 0.0, 0.5 + half_mass, 0.5 - half_mass)
    return float(out.reshape(())) if scalar else out


def sample_noise(spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """One noise vector: gamma-law radius times a uniform sphere direction.

    The same code path serves k = 0 and k > 0, so a general-gaussian spec
    with k = 0 consumes the generator identically to a standard one.
    """
    return _sample_noise_batch(spec, rng, 1)[0]


def _sample_noise_batch(spec: NoiseSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.gamma(spec.gamma_shape, 2.0, size=n)
    radii = spec.sigma_prime * np.sqrt(g)
    directions = rng.standard_normal((n, spec.d))
    norms = np.linalg.norm(directions, axis=1)
    while np.any(norms == 0.0):  # probability-zero guard
        redraw = norms == 0.0
        directions[redraw] = rng.standard_normal((int(redraw.sum()), spec.d))
        norms = np.linalg.norm(directions, axis=1)
    return directions * (radii / norms)[:, None]
