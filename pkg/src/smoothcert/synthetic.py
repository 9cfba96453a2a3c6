"""Analytic and Monte Carlo base classifiers for end-to-end certification.

Two toy models cover the cases a certification run needs without any
trained network.  The ball classifier predicts its target class exactly
on a centered L2 ball, so both smoothing probabilities are exact radial
CDF values and the whole pipeline can run on closed-form inputs.  The
linear classifier gives a half-space decision with known smoothed
behavior for sanity checks.  mc_counts layers the usual two-stage
sampling procedure (selection round, then independent estimation rounds
under P and Q) on top of either model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import NoiseSpec, radial_cdf, _sample_noise_batch
from .records import CountRecord

DEFAULT_N_SELECTION = 1000

# Draws are processed in fixed-size blocks so a 1e5-sample round at
# d = 4096 never materializes at once; the block size is part of the
# determinism contract (it fixes how the generator stream is consumed).
_BLOCK_DRAWS = 4096


@dataclass(frozen=True)
class BallClassifier:
    """Predicts target_class inside the L2 ball of radius threshold.

    Everything outside the ball gets the fixed other_class, so at the
    center the class probability under isotropic noise is exactly the
    radial CDF at the threshold.
    """

    center: tuple
    threshold: float
    target_class: int = 1
    other_class: int = 0

    def __post_init__(self) -> None:
        center = tuple(float(v) for v in self.center)
        object.__setattr__(self, "center", center)
        if len(center) == 0 or not all(math.isfinite(v) for v in center):
            raise ValueError("center must be a nonempty finite vector")
        if not (math.isfinite(self.threshold) and self.threshold > 0.0):
            raise ValueError(f"threshold must be positive, got {self.threshold!r}")
        if self.target_class == self.other_class:
            raise ValueError("target_class and other_class must differ")

    @property
    def d(self) -> int:
        return len(self.center)

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        dist = np.linalg.norm(xs - np.asarray(self.center), axis=1)
        return np.where(dist <= self.threshold, self.target_class, self.other_class)


@dataclass(frozen=True)
class LinearClassifier:
    """Binary decision by the sign of an affine form: class 1 iff w.x + b > 0."""

    weight: tuple
    bias: float = 0.0

    def __post_init__(self) -> None:
        weight = tuple(float(v) for v in self.weight)
        object.__setattr__(self, "weight", weight)
        if len(weight) == 0 or not all(math.isfinite(v) for v in weight):
            raise ValueError("weight must be a nonempty finite vector")
        if not math.isfinite(self.bias):
            raise ValueError(f"bias must be finite, got {self.bias!r}")

    @property
    def d(self) -> int:
        return len(self.weight)

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        score = xs @ np.asarray(self.weight) + self.bias
        return (score > 0.0).astype(np.int64)


def exact_probs(ball: BallClassifier, spec_p: NoiseSpec,
                spec_q: NoiseSpec) -> tuple[float, float]:
    """Exact (pA, qA) for the ball classifier smoothed at its own center.

    No sampling error: the target-class probability under either
    distribution is the radial CDF at the ball threshold.  The qA
    interval a caller should certify with is degenerate, [qA, qA].
    """
    if spec_p.d != ball.d or spec_q.d != ball.d:
        raise ValueError(
            f"spec dimension mismatch: ball d={ball.d}, "
            f"P d={spec_p.d}, Q d={spec_q.d}"
        )
    return float(radial_cdf(spec_p, ball.threshold)), float(
        radial_cdf(spec_q, ball.threshold)
    )


def _class_counts(classifier, x: np.ndarray, spec: NoiseSpec, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    counts = np.zeros(0, dtype=np.int64)
    done = 0
    while done < n:
        block = min(_BLOCK_DRAWS, n - done)
        noise = _sample_noise_batch(spec, rng, block)
        classes = np.asarray(classifier.predict(x[None, :] + noise), dtype=np.int64)
        if classes.min() < 0:
            raise ValueError("classifier returned a negative class id")
        top = int(classes.max()) + 1
        if top > counts.shape[0]:
            counts = np.concatenate([counts, np.zeros(top - counts.shape[0], dtype=np.int64)])
        counts += np.bincount(classes, minlength=counts.shape[0])
        done += block
    return counts


def smoothed_vote(classifier, x: np.ndarray, spec: NoiseSpec, n: int,
                  rng: np.random.Generator) -> int:
    """Majority class over n noisy evaluations; ties break to the lowest id."""
    counts = _class_counts(classifier, np.asarray(x, dtype=np.float64), spec, n, rng)
    return int(np.argmax(counts))


def mc_counts(classifier, x: np.ndarray, spec_p: NoiseSpec, spec_q: NoiseSpec,
              n_samples: int, n_selection: int = DEFAULT_N_SELECTION, seed: int = 0,
              *, example_id: str = "0", label: int | None = None) -> CountRecord:
    """Two-stage count sampling at x: selection under P, estimation under P and Q.

    n_selection draws under P pick the top class; n_samples fresh draws
    under each of P and Q count how often that class recurs.  The label
    defaults to the classifier's clean prediction at x, so ``correct``
    downstream means the smoothed and clean predictions agree.
    """
    if spec_p.d != spec_q.d:
        raise ValueError(f"spec dimension mismatch: P d={spec_p.d}, Q d={spec_q.d}")
    if spec_p.kind != spec_q.kind or spec_p.k != spec_q.k:
        raise ValueError("P and Q must share kind and k (sigma may differ)")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec_p.d:
        raise ValueError(f"x must be a d-vector with d={spec_p.d}")
    rng = np.random.default_rng(seed)
    predicted = smoothed_vote(classifier, x, spec_p, n_selection, rng)
    counts_p = _class_counts(classifier, x, spec_p, n_samples, rng)
    counts_q = _class_counts(classifier, x, spec_q, n_samples, rng)
    count_p = int(counts_p[predicted]) if predicted < counts_p.shape[0] else 0
    count_q = int(counts_q[predicted]) if predicted < counts_q.shape[0] else 0
    if label is None:
        label = int(np.asarray(classifier.predict(x[None, :]))[0])
    return CountRecord(
        example_id=example_id,
        label=label,
        predicted=predicted,
        n_selection=n_selection,
        count_p=count_p,
        count_q=count_q,
        n_samples=n_samples,
        kind=spec_p.kind,
        sigma_p=spec_p.sigma,
        sigma_q=spec_q.sigma,
        k=spec_p.k,
        d=spec_p.d,
        seed=seed,
    )
