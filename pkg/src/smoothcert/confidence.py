"""Exact binomial confidence bounds for Monte Carlo class probabilities.

Certification consumes counts, not probabilities; these bounds convert
counts into the one-sided lower bound pA_low (under the sampling
distribution P) and the two-sided interval [qA_low, qA_high] (under Q)
that the worst-case analyses require.  The bounds are the classic exact
ones: quantiles of the Beta laws attached to the binomial tail, found by
bisection on the in-house incomplete beta.

The total failure probability alpha is split alpha/2 to the P-side lower
bound and alpha/4 to each side of the Q interval, so the union bound
keeps the joint failure probability at most alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _special

DEFAULT_ALPHA = 0.001
DEFAULT_NUM_SAMPLES = 50_000


@dataclass(frozen=True)
class ProbBounds:
    """Confidence-bounded class probabilities from one count record."""

    pA_low: float
    qA_low: float
    qA_high: float
    alpha: float
    N: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.pA_low <= 1.0):
            raise ValueError(f"pA_low outside [0, 1]: {self.pA_low!r}")
        if not (0.0 <= self.qA_low <= self.qA_high <= 1.0):
            raise ValueError(
                f"qA interval invalid: [{self.qA_low!r}, {self.qA_high!r}]"
            )


def _validate_counts(x: np.ndarray, n: np.ndarray, a: np.ndarray) -> None:
    if np.any(n < 1) or np.any(n != np.floor(n)):
        raise ValueError("n must be a positive integer")
    if np.any(x < 0) or np.any(x > n) or np.any(x != np.floor(x)):
        raise ValueError("count x must be an integer in [0, n]")
    if np.any(a <= 0.0) or np.any(a >= 1.0):
        raise ValueError("confidence level a must lie in (0, 1)")


def cp_lower(x: object, n: object, a: object) -> np.ndarray | float:
    """One-sided exact lower confidence bound on a binomial proportion.

    Returns the a-quantile of Beta(x, n - x + 1); 0 when x = 0, and the
    closed form a**(1/n) when x = n.
    """
    xa, na, aa = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64),
        np.asarray(n, dtype=np.float64),
        np.asarray(a, dtype=np.float64),
    )
    scalar = xa.ndim == 0
    xa, na, aa = np.atleast_1d(xa), np.atleast_1d(na), np.atleast_1d(aa)
    _validate_counts(xa, na, aa)
    out = np.zeros(xa.shape)
    full = xa == na
    out[full] = aa[full] ** (1.0 / na[full])
    interior = (xa > 0) & ~full
    if np.any(interior):
        xi, ni, ai = xa[interior], na[interior], aa[interior]
        out[interior] = _special.bisect_increasing(
            lambda p: np.atleast_1d(_special.reg_beta(xi, ni - xi + 1.0, p)),
            np.zeros(xi.shape),
            np.ones(xi.shape),
            ai,
        )
    return float(out.reshape(())) if scalar else out


def cp_upper(x: object, n: object, a: object) -> np.ndarray | float:
    """One-sided exact upper confidence bound: 1 - cp_lower(n - x, n, a)."""
    xa, na = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(n, dtype=np.float64)
    )
    return 1.0 - cp_lower(na - xa, na, a)


def double_sampling_bounds(
    countP: int, countQ: int, N: int, alpha: float = DEFAULT_ALPHA
) -> ProbBounds:
    """Joint bounds for one record: pA_low at level alpha/2, qA interval at
    alpha/4 per side, total failure probability <= alpha by union bound."""
    p_low = float(cp_lower(countP, N, alpha / 2.0))
    q_low = float(cp_lower(countQ, N, alpha / 4.0))
    q_high = float(cp_upper(countQ, N, alpha / 4.0))
    return ProbBounds(pA_low=p_low, qA_low=q_low, qA_high=q_high, alpha=alpha, N=N)
