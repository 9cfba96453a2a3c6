"""Single-distribution certification: worst-case class probability under a
shift, and the largest radius at which it stays above one half.

For standard Gaussian noise both quantities have closed forms through the
normal CDF.  For generalized Gaussian noise the worst case comes from the
single-multiplier solve of the shared engine (the two-multiplier problem
with the second multiplier pinned to zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _engine
from .distributions import STANDARD_GAUSSIAN, NoiseSpec
from ._special import normal_cdf, normal_quantile

RADIUS_CAP_FACTOR = 10.0
DEFAULT_RADIUS_TOL = 1e-4


@dataclass(frozen=True)
class CertQuery:
    """A lower class-probability bound under one noise law, and a shift radius."""

    spec: NoiseSpec
    pA_low: float
    radius: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.pA_low <= 1.0):
            raise ValueError(f"pA_low must lie in [0, 1], got {self.pA_low}")
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")


def np_radius_gaussian(sigma: float, pA_low: float) -> float:
    """Closed-form certified radius sigma * Phi^-1(pA_low) for standard
    Gaussian smoothing, floored at zero when the bound does not certify."""
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be finite and positive, got {sigma}")
    if not (0.0 < pA_low < 1.0):
        raise ValueError(f"pA_low must lie in (0, 1), got {pA_low}")
    return max(0.0, sigma * float(normal_quantile(pA_low)))


def np_worst_case(query: CertQuery) -> float:
    """Smallest achievable shifted class probability over all classifiers
    matching the bound: Phi(Phi^-1(pA) - r/sigma) in the standard case,
    a single-multiplier dual solve otherwise."""
    if query.radius == 0.0:
        return query.pA_low
    if query.pA_low in (0.0, 1.0):
        # the constraint pins the classifier almost everywhere, and the
        # shifted law shares null sets with the original
        return query.pA_low
    if query.spec.kind == STANDARD_GAUSSIAN:
        z = float(normal_quantile(query.pA_low))
        return float(normal_cdf(z - query.radius / query.spec.sigma))
    return _solve(query)


def _solve(query: CertQuery) -> float:
    # node counts double until the solved value settles; the radius
    # searches skip this (both methods bisect the same lattice with the
    # same base resolution, so their biases cancel in comparisons)
    n = _engine.DEFAULT_NODES
    warm = None
    prev = None
    while True:
        eng = _engine.Engine(query.spec, query.spec, query.radius, n)
        warm, _, e_pdelta = eng.solve_single(query.pA_low, warm)
        if prev is not None and abs(e_pdelta - prev) <= 2e-6:
            return e_pdelta
        if n >= 16 * _engine.DEFAULT_NODES:
            return e_pdelta
        prev = e_pdelta
        n *= 2


def np_radius(spec: NoiseSpec, pA_low: float, tol: float = DEFAULT_RADIUS_TOL) -> float:
    """Largest radius on the standard bisection lattice whose worst case
    stays above one half.  Capped at RADIUS_CAP_FACTOR * sigma_prime."""
    if not (0.0 <= pA_low <= 1.0):
        raise ValueError(f"pA_low must lie in [0, 1], got {pA_low}")
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")
    if pA_low <= 0.5:
        return 0.0
    r_max = RADIUS_CAP_FACTOR * spec.sigma_prime
    if spec.kind == STANDARD_GAUSSIAN:
        return min(np_radius_gaussian(spec.sigma, pA_low), r_max)
    warm: dict[str, float] = {}

    def certified_at(r: float) -> bool:
        eng = _engine.Engine(spec, spec, r)
        u1, _, e_pdelta = eng.solve_single(pA_low, warm.get("u1"))
        warm["u1"] = u1
        return e_pdelta > 0.5

    return _engine.radius_bisect(certified_at, r_max, tol)
