"""Per-example record types shared by the pipeline, the samplers, and IO.

A CountRecord is the unit of work the certifier consumes: Monte Carlo
class counts for one example under the two sampling distributions, plus
enough noise configuration to rebuild both NoiseSpec objects.  A
CertResult is the unit it produces.  Both are plain frozen dataclasses
so batches can be sorted, compared, and serialized deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .distributions import NoiseSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CountRecord:
    """Sampling counts for one example.

    count_p and count_q are the number of draws (out of n_samples per
    distribution) on which the base classifier returned ``predicted``;
    ``predicted`` itself comes from a separate selection round of
    n_selection draws under P.
    """

    example_id: str
    label: int
    predicted: int
    n_selection: int
    count_p: int
    count_q: int
    n_samples: int
    kind: str
    sigma_p: float
    sigma_q: float
    k: int
    d: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.example_id, str) or not self.example_id:
            raise ValueError("example_id must be a nonempty string")
        for name in ("label", "predicted", "n_selection", "count_p", "count_q",
                     "n_samples", "seed"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if self.label < 0 or self.predicted < 0:
            raise ValueError("label and predicted must be nonnegative class ids")
        if self.n_samples < 1 or self.n_selection < 1:
            raise ValueError("n_samples and n_selection must be >= 1")
        if not (0 <= self.count_p <= self.n_samples):
            raise ValueError(
                f"count_p = {self.count_p} outside [0, n_samples = {self.n_samples}]"
            )
        if not (0 <= self.count_q <= self.n_samples):
            raise ValueError(
                f"count_q = {self.count_q} outside [0, n_samples = {self.n_samples}]"
            )
        # Constructing the specs validates kind / sigma / k / d jointly.
        self.spec_p
        self.spec_q

    @property
    def spec_p(self) -> NoiseSpec:
        return NoiseSpec(kind=self.kind, sigma=self.sigma_p, k=self.k, d=self.d)

    @property
    def spec_q(self) -> NoiseSpec:
        return NoiseSpec(kind=self.kind, sigma=self.sigma_q, k=self.k, d=self.d)


@dataclass(frozen=True)
class CertResult:
    """Certification outcome for one example under one method.

    wall_time is measurement metadata: it never participates in equality
    or serialization, so repeated runs stay byte-identical.
    """

    example_id: str
    method: str
    radius: float
    abstained: bool
    correct: bool
    pa_low: float
    qa_low: float
    qa_high: float
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        if self.method not in ("np", "dsrs"):
            raise ValueError(f"method must be 'np' or 'dsrs', got {self.method!r}")
        if not (math.isfinite(self.radius) and self.radius >= 0.0):
            raise ValueError(f"radius must be finite and >= 0, got {self.radius!r}")
        if self.abstained and self.radius != 0.0:
            raise ValueError("abstained results must carry radius 0")
        for name in ("pa_low", "qa_low", "qa_high"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
