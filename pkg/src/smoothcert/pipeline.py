"""Per-example certification and aggregate tables, ACR, and ablation curves.

The pipeline turns count records into certified radii (both the
single-law and the two-law method on identical bounds), then folds the
results into certified-accuracy rows, average certified radius, and the
curves the command line emits: radius versus N, k, sigma_Q, and
dimension.  Certification of a batch can fan out to a thread pool;
aggregation is a deterministic fold ordered by example id, never by
completion order.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import _special
from .confidence import DEFAULT_ALPHA, double_sampling_bounds
from .distributions import NoiseSpec, radial_cdf, radial_quantile
from .dsrs import DsrsProblem, dsrs_radius
from .errors import NumericFailure
from .neyman_pearson import DEFAULT_RADIUS_TOL, np_radius, np_radius_gaussian
from .records import CertResult, CountRecord
from .synthetic import BallClassifier, exact_probs

logger = logging.getLogger(__name__)

_MODES = ("np", "dsrs", "both")


def _t_quantile(conf: float, dof: int) -> float:
    """Student-t quantile at confidence conf >= 0.5, by bisection on the
    incomplete-beta tail form of the CDF."""
    if not (0.5 <= conf < 1.0):
        raise ValueError(f"conf must lie in [0.5, 1), got {conf}")
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")

    def cdf(t: float) -> float:
        if t == 0.0:
            return 0.5
        x = dof / (dof + t * t)
        return 1.0 - 0.5 * float(_special.reg_beta(0.5 * dof, 0.5, x))

    hi = 1.0
    while cdf(hi) < conf:
        hi *= 2.0
        if hi > 1e12:
            raise NumericFailure("t quantile bracket exhausted", conf=conf, dof=dof)
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < conf:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def certify_record(
    record: CountRecord,
    *,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_RADIUS_TOL,
    mode: str = "both",
) -> tuple[CertResult, ...]:
    """Certified radii for one record under the requested method(s).

    Confidence bounds come from the record's counts at joint level alpha;
    both methods consume the identical pA_low.  The example abstains
    (radius 0, counted incorrect) when pA_low <= 1/2.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    bounds = double_sampling_bounds(
        record.count_p, record.count_q, record.n_samples, alpha
    )
    abstain = bounds.pA_low <= 0.5
    correct = (not abstain) and record.predicted == record.label
    common = dict(
        example_id=record.example_id,
        abstained=abstain,
        correct=correct,
        pa_low=bounds.pA_low,
        qa_low=bounds.qA_low,
        qa_high=bounds.qA_high,
    )
    results: list[CertResult] = []
    if mode in ("np", "both"):
        start = time.perf_counter()
        radius = 0.0 if abstain else np_radius(record.spec_p, bounds.pA_low, tol)
        results.append(
            CertResult(method="np", radius=radius,
                       wall_time=time.perf_counter() - start, **common)
        )
    if mode in ("dsrs", "both"):
        start = time.perf_counter()
        if abstain:
            radius = 0.0
        else:
            problem = DsrsProblem(
                record.spec_p, record.spec_q, bounds.pA_low,
                bounds.qA_low, bounds.qA_high, 0.0,
            )
            radius = dsrs_radius(problem, tol)
        results.append(
            CertResult(method="dsrs", radius=radius,
                       wall_time=time.perf_counter() - start, **common)
        )
    return tuple(results)


def certify_batch(
    records: Sequence[CountRecord],
    *,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_RADIUS_TOL,
    mode: str = "both",
    workers: int = 1,
    failures: list | None = None,
) -> list[CertResult]:
    """Certify every record, in parallel when workers > 1.

    Records that fail (invalid values, numeric breakdown) are logged and
    collected into the optional failures list as (example_id, exception);
    the batch continues.  Results are ordered by (example_id, method),
    independent of completion order.
    """

    def one(record: CountRecord) -> tuple[CertResult, ...]:
        return certify_record(record, alpha=alpha, tol=tol, mode=mode)

    results: list[CertResult] = []

    def consume(record: CountRecord, outcome, error: Exception | None) -> None:
        if error is not None:
            logger.error("record %s failed: %s", record.example_id, error)
            if failures is not None:
                failures.append((record.example_id, error))
        else:
            results.extend(outcome)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(rec, pool.submit(one, rec)) for rec in records]
            for rec, fut in futures:
                try:
                    consume(rec, fut.result(), None)
                except (ValueError, ArithmeticError, NumericFailure) as exc:
                    consume(rec, None, exc)
    else:
        for rec in records:
            try:
                consume(rec, one(rec), None)
            except (ValueError, ArithmeticError, NumericFailure) as exc:
                consume(rec, None, exc)
    results.sort(key=lambda res: (res.example_id, res.method))
    if failures is not None:
        failures.sort(key=lambda pair: pair[0])
    return results


def certified_accuracy(
    results: Sequence[CertResult] | Sequence[Sequence[CertResult]],
    grid: Sequence[float],
) -> list[dict]:
    """Certified-accuracy rows over a radius grid.

    One row per grid radius: the fraction of examples that are correct
    and certified at least that far.  With several runs supplied (a
    sequence of result lists), each row carries the mean accuracy and the
    95% half-width across runs (Student-t, n - 1 degrees of freedom).
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("radius grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("radius grid must be sorted strictly ascending")
    multi = bool(results) and isinstance(results[0], (list, tuple))
    runs = [list(run) for run in results] if multi else [list(results)]

    def run_accuracy(run: list[CertResult]) -> list[float]:
        if not run:
            logger.warning("certified_accuracy over an empty result set; zero row")
            return [0.0] * len(grid)
        return [
            sum(1 for res in run if res.correct and res.radius >= g) / len(run)
            for g in grid
        ]

    per_run = np.array([run_accuracy(run) for run in runs])
    rows: list[dict] = []
    for j, g in enumerate(grid):
        row: dict = {"radius": g, "accuracy": float(np.mean(per_run[:, j]))}
        if multi and len(runs) > 1:
            spread = float(np.std(per_run[:, j], ddof=1))
            half = _t_quantile(0.975, len(runs) - 1) * spread / math.sqrt(len(runs))
            row["half_width"] = half
        rows.append(row)
    return rows


def acr(results: Sequence[CertResult]) -> float:
    """Average certified radius: mean of radius * 1{correct} over all
    evaluated examples, abstentions included at zero.  Empty input -> 0."""
    results = list(results)
    if not results:
        return 0.0
    return sum(res.radius for res in results if res.correct) / len(results)


def _split_acr(results: Sequence[CertResult]) -> tuple[float, float]:
    by_np = [res for res in results if res.method == "np"]
    by_ds = [res for res in results if res.method == "dsrs"]
    return acr(by_np), acr(by_ds)


def _rescale_record(record: CountRecord, n: int) -> CountRecord:
    def scale(count: int) -> int:
        return min(n, max(0, round(count * n / record.n_samples)))

    return CountRecord(
        example_id=record.example_id,
        label=record.label,
        predicted=record.predicted,
        n_selection=record.n_selection,
        count_p=scale(record.count_p),
        count_q=scale(record.count_q),
        n_samples=n,
        kind=record.kind,
        sigma_p=record.sigma_p,
        sigma_q=record.sigma_q,
        k=record.k,
        d=record.d,
        seed=record.seed,
    )


def ablation_n(
    records: Sequence[CountRecord],
    n_values: Sequence[int],
    *,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_RADIUS_TOL,
    workers: int = 1,
) -> list[dict]:
    """ACR of both methods as the per-distribution sample count varies.

    Counts are rescaled proportionally to each N (the underlying hit
    rate is kept, the confidence width changes), then every record is
    recertified.  Rows: {x: N, np_value, dsrs_value}.
    """
    if not n_values:
        raise ValueError("n_values must be nonempty")
    rows = []
    for n in n_values:
        if n < 1:
            raise ValueError(f"sample counts must be >= 1, got {n}")
        scaled = [_rescale_record(rec, int(n)) for rec in records]
        results = certify_batch(
            scaled, alpha=alpha, tol=tol, mode="both", workers=workers
        )
        acr_np, acr_ds = _split_acr(results)
        rows.append({"x": int(n), "np_value": acr_np, "dsrs_value": acr_ds})
    return rows


def ablation_k(
    d: int,
    sigma: float,
    k_values: Sequence[int],
    pA: float,
    qA: float,
    *,
    sigma_q_factor: float = 0.8,
    tol: float = DEFAULT_RADIUS_TOL,
) -> list[dict]:
    """Certified radii of both methods across pole orders k at fixed
    probability inputs (pA lower bound, degenerate qA).

    Rows: {x: k, np_value, dsrs_value}.  Invalid pole orders (2k >= d)
    raise the noise-spec domain error.
    """
    if not k_values:
        raise ValueError("k_values must be nonempty")
    rows = []
    for k in k_values:
        spec_p = NoiseSpec.general(sigma, int(k), d)
        spec_q = NoiseSpec.general(sigma * sigma_q_factor, int(k), d)
        r_np = np_radius(spec_p, pA, tol)
        r_ds = dsrs_radius(DsrsProblem(spec_p, spec_q, pA, qA, qA, 0.0), tol)
        rows.append({"x": int(k), "np_value": r_np, "dsrs_value": r_ds})
    return rows


def ablation_sigma_q(
    balls: Sequence[BallClassifier],
    spec_p: NoiseSpec,
    sigma_q_values: Sequence[float],
    *,
    n_samples: int = 50_000,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    tol: float = DEFAULT_RADIUS_TOL,
) -> list[dict]:
    """ACR of both methods as the secondary scale sigma_Q varies, on a
    fixed batch of ball instances with sampled counts.

    Exact probabilities would be degenerate here: a point qA pins the
    ball set itself, and the certified value stops depending on sigma_Q
    entirely.  On real data sigma_Q acts through the width and location
    of the qA confidence interval, so the counts are sampled - and since
    ball hit probabilities are exact, the two-stage protocol collapses to
    seeded binomial draws: count_p once per ball (P does not move with
    sigma_Q), count_q per (ball, sigma_Q), drawn balls-outer from one
    stream.  Rows: {x: sigma_q, np_value, dsrs_value}; np_value does not
    depend on sigma_q and is repeated for table symmetry.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    balls = list(balls)
    sigma_q_values = [float(s) for s in sigma_q_values]
    if not balls or not sigma_q_values:
        raise ValueError("balls and sigma_q_values must be nonempty")
    rng = np.random.default_rng(seed)
    probs_p = [float(radial_cdf(spec_p, ball.threshold)) for ball in balls]
    counts_p = [int(rng.binomial(n_samples, pa)) for pa in probs_p]
    specs_q = [
        NoiseSpec(kind=spec_p.kind, sigma=s, k=spec_p.k, d=spec_p.d)
        for s in sigma_q_values
    ]
    counts_q = [
        [int(rng.binomial(n_samples, float(radial_cdf(sq, ball.threshold))))
         for sq in specs_q]
        for ball in balls
    ]
    radii_np: list[float] = []
    bounds_rows = []
    for count_p, row in zip(counts_p, counts_q):
        per_sigma = [
            double_sampling_bounds(count_p, cq, n_samples, alpha) for cq in row
        ]
        bounds_rows.append(per_sigma)
        pa_low = per_sigma[0].pA_low
        radii_np.append(np_radius(spec_p, pa_low, tol) if pa_low > 0.5 else 0.0)
    acr_np = sum(radii_np) / len(radii_np) if radii_np else 0.0
    rows = []
    for j, (sigma_q, spec_q) in enumerate(zip(sigma_q_values, specs_q)):
        total = 0.0
        for per_sigma in bounds_rows:
            bounds = per_sigma[j]
            if bounds.pA_low <= 0.5:
                continue
            total += dsrs_radius(
                DsrsProblem(spec_p, spec_q, bounds.pA_low,
                            bounds.qA_low, bounds.qA_high, 0.0),
                tol,
            )
        acr_ds = total / len(balls) if balls else 0.0
        rows.append({"x": sigma_q, "np_value": acr_np, "dsrs_value": acr_ds})
    return rows


def sqrt_d_curve(
    dims: Sequence[int],
    *,
    sigma: float = 0.5,
    p_inner: float = 0.999,
    k_offset: int = 8,
    sigma_q_factor: float = 0.8,
    tol: float = DEFAULT_RADIUS_TOL,
) -> list[dict]:
    """Certified radius versus dimension on ball-classifier instances.

    For each d: k = d/2 - k_offset, the ball threshold sits at the
    p_inner radial quantile of P, and both probabilities are exact.  The
    np_value column is the standard-Gaussian closed form at the same
    sigma and pA, the d-free baseline the growth is measured against.
    Rows: {x: d, np_value, dsrs_value}.
    """
    if not dims:
        raise ValueError("dims must be nonempty")
    rows = []
    baseline = np_radius_gaussian(sigma, p_inner)
    for d in dims:
        d = int(d)
        k = d // 2 - k_offset
        if k < 0:
            raise ValueError(f"dimension {d} too small for k offset {k_offset}")
        spec_p = NoiseSpec.general(sigma, k, d)
        spec_q = NoiseSpec.general(sigma * sigma_q_factor, k, d)
        threshold = float(radial_quantile(spec_p, p_inner))
        ball = BallClassifier(center=(0.0,) * d, threshold=threshold)
        pa, qa = exact_probs(ball, spec_p, spec_q)
        r_ds = dsrs_radius(DsrsProblem(spec_p, spec_q, pa, qa, qa, 0.0), tol)
        rows.append({"x": d, "np_value": baseline, "dsrs_value": r_ds})
    return rows
