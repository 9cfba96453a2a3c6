"""Two-distribution certification.

The classifier's class probability is constrained under a primary noise law
P (a lower bound) and a secondary law Q (an interval).  The worst case over
all classifiers meeting both constraints is a two-multiplier dual problem:
the optimal classifier accepts where p_delta <= lambda1 p + lambda2 q, the
multipliers are pinned by the two constraints through nested bisection, and
the certified value is the minimum of the resulting shifted probability
over the admissible secondary targets.

Certification with the interval reduces to a one-dimensional minimization
over the target value of the Q constraint: endpoints plus a golden-section
refinement, since the dual value is unimodal in the target.

One boundary case bypasses the duals entirely.  When the admissible
targets touch the edge of the feasible range (a monotone likelihood
ratio pins the extremes to balls and shells), the only classifier
meeting both constraints is that radial set itself, so the certified
value is its shifted mass, computed by a single radial quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .distributions import NoiseSpec, angular_cdf, radial_cdf, radial_quantile
from .errors import InfeasibleConstraints
from .neyman_pearson import CertQuery, DEFAULT_RADIUS_TOL, RADIUS_CAP_FACTOR, np_radius, np_worst_case

logger = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GSS_EVALS = 16
_Q_INSET = 1e-9


@dataclass(frozen=True)
class DsrsProblem:
    """Constraint data for one certification: primary law and its lower
    probability bound, secondary law and its probability interval, and the
    shift radius under test."""

    spec_p: NoiseSpec
    spec_q: NoiseSpec
    pA_low: float
    qA_low: float
    qA_high: float
    radius: float

    def __post_init__(self) -> None:
        if self.spec_p.d != self.spec_q.d:
            raise ValueError(
                f"noise laws must share the dimension, got {self.spec_p.d} and {self.spec_q.d}"
            )
        for name in ("pA_low", "qA_low", "qA_high"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.qA_low > self.qA_high:
            raise ValueError(
                f"qA interval is empty: [{self.qA_low}, {self.qA_high}]"
            )
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")


@dataclass(frozen=True)
class DualPoint:
    """A solved pair of multipliers with the three expectations of the
    induced acceptance set.  Multipliers beyond the float range are
    reported as signed infinities; the expectations remain exact."""

    lambda1: float
    lambda2: float
    e_p: float
    e_q: float
    e_pdelta: float


def _u_from_lambda(lam: float) -> float:
    if not math.isfinite(lam):
        raise ValueError(f"multipliers must be finite, got {lam}")
    return _engine.u_from_lambda(lam)


def _radial_measure_at_zero_shift(
    spec_law: NoiseSpec,
    problem: DsrsProblem,
    u1: float,
    u2: float,
    n_nodes: int,
) -> float:
    """Measure under spec_law of {t : p(t) <= lambda1 p(t) + lambda2 q(t)}.

    At radius zero the acceptance set is radial, so the direction plays no
    role: isolate the sign changes of the condition over a quantile grid in
    t, refine each by bisection, and sum radial-CDF differences."""
    params_p = _engine._density_params(problem.spec_p)
    params_q = _engine._density_params(problem.spec_q)
    s1, l1 = _engine._u_to_sign_log(u1)
    s2, l2 = _engine._u_to_sign_log(u2)

    def accept(t: np.ndarray) -> np.ndarray:
        ln_p = _engine._log_density(params_p, t)
        ln_q = _engine._log_density(params_q, t)
        w_sign, ln_w = _engine._signed_sum_log(s1, l1 + ln_p, s2, l2 + ln_q)
        return (w_sign > 0.0) & (ln_p <= ln_w)

    probs = np.concatenate(([1e-9], (np.arange(n_nodes) + 0.5) / n_nodes, [1.0 - 1e-9]))
    t = np.asarray(radial_quantile(spec_law, probs))
    states = accept(t)
    measure = float(states[-1])
    flips = np.nonzero(states[:-1] != states[1:])[0]
    if flips.size:
        lo, hi = t[flips].copy(), t[flips + 1].copy()
        state_lo = states[flips]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            same = accept(mid) == state_lo
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        cdf = np.asarray(radial_cdf(spec_law, 0.5 * (lo + hi)))
        measure += float(np.sum(np.where(state_lo, cdf, -cdf)))
    return measure


def expectations(
    problem: DsrsProblem,
    lambda1: float,
    lambda2: float,
    *,
    n_nodes: int = _engine.DEFAULT_NODES,
) -> tuple[float, float, float]:
    """The three expectations (e_p, e_q, e_pdelta) of the acceptance set
    {p_delta <= lambda1 p + lambda2 q} at the problem's radius.

    Quantile-transformed composite midpoint quadrature; node counts double
    until successive estimates agree to 1e-7."""
    u1, u2 = _u_from_lambda(lambda1), _u_from_lambda(lambda2)
    if problem.radius == 0.0:
        e_p = _radial_measure_at_zero_shift(problem.spec_p, problem, u1, u2, n_nodes)
        e_q = _radial_measure_at_zero_shift(problem.spec_q, problem, u1, u2, n_nodes)
        return e_p, e_q, e_p
    return _engine.adaptive_expectations(
        problem.spec_p, problem.spec_q, problem.radius, u1, u2, base_nodes=n_nodes
    )


def solve_duals(
    problem: DsrsProblem,
    q_target: float,
    *,
    n_nodes: int = _engine.DEFAULT_NODES,
) -> DualPoint:
    """Multipliers matching e_p = pA_low and e_q = q_target at the problem's
    radius, found by nested bisection to 1e-6 in both constraints."""
    if not (0.0 < q_target < 1.0):
        raise ValueError(f"q_target must lie in (0, 1), got {q_target}")
    if not (0.0 < problem.pA_low < 1.0):
        raise ValueError(f"pA_low must lie in (0, 1) to solve, got {problem.pA_low}")
    if problem.radius == 0.0:
        # zero shift: e_pdelta = e_p for every classifier, so the point is
        # known without multipliers (none are pinned; reported as nan)
        return DualPoint(
            lambda1=math.nan, lambda2=math.nan,
            e_p=problem.pA_low, e_q=q_target, e_pdelta=problem.pA_low,
        )
    if (problem.spec_p.k == problem.spec_q.k
            and problem.spec_p.sigma_prime == problem.spec_q.sigma_prime):
        # equal laws: the q constraint duplicates the p constraint, leaving
        # no second degree of freedom for the pair solver.  Reduce to the
        # single-law problem; lambda2 is unidentified and reported as zero.
        if abs(q_target - problem.pA_low) > _engine.PROB_TOL:
            raise InfeasibleConstraints(
                f"equal sampling laws force e_q = e_p, so q_target {q_target} "
                f"contradicts pA_low {problem.pA_low}"
            )
        eng = _engine.Engine(problem.spec_p, problem.spec_p, problem.radius, n_nodes)
        u1, _, _ = eng.solve_single(problem.pA_low, None)
        value = np_worst_case(CertQuery(problem.spec_p, problem.pA_low, problem.radius))
        return DualPoint(
            lambda1=_engine.u_to_lambda(u1), lambda2=0.0,
            e_p=problem.pA_low, e_q=problem.pA_low, e_pdelta=value,
        )
    eng = _engine.Engine(problem.spec_p, problem.spec_q, problem.radius, n_nodes)
    u1, u2, e_p, e_q, e_pdelta = eng.solve_pair(problem.pA_low, q_target)
    return DualPoint(
        lambda1=_engine.u_to_lambda(u1),
        lambda2=_engine.u_to_lambda(u2),
        e_p=e_p,
        e_q=e_q,
        e_pdelta=e_pdelta,
    )


def _q_range_oriented(
    spec_p: NoiseSpec, spec_q: NoiseSpec, pA: float
) -> tuple[float, float, str | None]:
    """Feasible range of E_Q[f] plus the direction of the ratio q/p in t.

    Orientation "dec"/"inc" means the ratio is strictly monotone, so the
    extremes are exactly a centered ball (ratio-favored end) and its
    complementary shell; None means the range is either degenerate (equal
    laws) or conservatively widened to [0, 1] (mixed ratio shape)."""
    if spec_p.d != spec_q.d:
        raise ValueError(
            f"noise laws must share the dimension, got {spec_p.d} and {spec_q.d}"
        )
    if not (0.0 <= pA <= 1.0):
        raise ValueError(f"pA must lie in [0, 1], got {pA}")
    if pA in (0.0, 1.0):
        return pA, pA, None
    # ln(q/p)(t) = C + a ln t + b t^2
    a = 2.0 * (spec_p.k - spec_q.k)
    b = 1.0 / (2.0 * spec_p.sigma_prime**2) - 1.0 / (2.0 * spec_q.sigma_prime**2)
    if a == 0.0 and b == 0.0:
        return pA, pA, None
    if a * b < 0.0:
        return 0.0, 1.0, None
    increasing = (a > 0.0) or (b > 0.0)
    ball_mass = float(radial_cdf(spec_q, float(radial_quantile(spec_p, pA))))
    shell_mass = 1.0 - float(radial_cdf(spec_q, float(radial_quantile(spec_p, 1.0 - pA))))
    if increasing:
        return ball_mass, shell_mass, "inc"
    return shell_mass, ball_mass, "dec"


def feasible_q_range(spec_p: NoiseSpec, spec_q: NoiseSpec, pA: float) -> tuple[float, float]:
    """Range of E_Q[f] over classifiers with E_P[f] = pA.

    The extremes are likelihood-ratio sets.  With matching pole orders the
    radial density ratio q/p is monotone in the radius and the extremes are
    images of radial quantiles; for mixed-sign ratio shapes the
    conservative full range is returned."""
    q_min, q_max, _ = _q_range_oriented(spec_p, spec_q, pA)
    return q_min, q_max


def _interval_plan(
    spec_p: NoiseSpec, spec_q: NoiseSpec, pA: float, qA_low: float, qA_high: float
) -> tuple:
    """Classify the constraint interval against the feasible range.

    Tags: ("infeasible",) no classifier meets both constraints;
    ("vacuous",) the interval covers the whole range, Q adds nothing;
    ("corner", side) the intersection hugs a range endpoint, pinning the
    classifier to the radial set named by side ("ball"/"shell");
    ("point", q) the range itself is degenerate; ("interval", lo, hi) the
    regular case, inset from the endpoints to keep the duals finite."""
    q_min, q_max, orient = _q_range_oriented(spec_p, spec_q, pA)
    if qA_low > q_max or qA_high < q_min:
        return ("infeasible",)
    if qA_low <= q_min + 1e-12 and qA_high >= q_max - 1e-12:
        return ("vacuous",)
    lo = max(qA_low, q_min + _Q_INSET)
    hi = min(qA_high, q_max - _Q_INSET)
    if lo <= hi:
        return ("interval", lo, hi)
    if q_max - q_min <= 2.0 * _Q_INSET:
        return ("point", min(max(0.5 * (q_min + q_max), qA_low), qA_high))
    if orient is None:
        # conservative range: its endpoints are not known to be radial sets
        return ("infeasible",)
    if qA_low > q_max - _Q_INSET:
        return ("corner", "ball" if orient == "dec" else "shell")
    return ("corner", "shell" if orient == "dec" else "ball")


def _corner_value(
    spec_p: NoiseSpec, pA: float, radius: float, side: str, n_nodes: int
) -> float:
    """Shifted P-mass of the radial set pinned by a boundary target.

    side "ball" is {t <= T} with P-mass pA; side "shell" is the complement
    of a ball with P-mass 1 - pA.  The shifted mass is a single radial
    integral of the angular CDF at the crossing cosine, with node counts
    doubled until the estimate settles."""
    if radius == 0.0:
        # unshifted mass of either pinned set is pA itself
        return pA
    inner = pA if side == "ball" else 1.0 - pA
    thr = float(radial_quantile(spec_p, inner))
    n = n_nodes
    prev = None
    while True:
        a = _engine._quantile_nodes(spec_p, n)
        arg = (thr * thr - radius * radius - a * a) / (2.0 * radius * a)
        mass = float(np.mean(angular_cdf(spec_p.d, np.clip(arg, -1.0, 1.0))))
        value = mass if side == "ball" else 1.0 - mass
        if prev is not None and abs(value - prev) <= 1e-8:
            return value
        if n >= 32 * 1024:
            logger.warning(
                "boundary-set quadrature settled to %.3g only; using the finest estimate",
                abs(value - prev) if prev is not None else math.nan,
            )
            return value
        prev = value
        n *= 2


def _worst_case_core(
    problem_key: tuple[NoiseSpec, NoiseSpec, float],
    radius: float,
    q_lo: float,
    q_hi: float,
    threshold: float | None,
    state: dict[str, tuple[float, float]],
    n_nodes: int,
) -> float | None:
    """Min of the dual value over targets in [q_lo, q_hi]: endpoints plus a
    16-point golden-section refinement.  With a threshold, returns as soon
    as any candidate value drops to it (enough to decide a radius step).
    Returns None when every candidate solve failed."""
    spec_p, spec_q, pA = problem_key
    eng = _engine.Engine(spec_p, spec_q, radius, n_nodes)
    best = math.inf
    last: tuple[float, float] | None = None

    def attempt(slot: str, q: float) -> float:
        nonlocal best, last
        warm = state.get(slot, last)
        try:
            u1, u2, _, _, e_pdelta = eng.solve_pair(pA, q, warm)
        except InfeasibleConstraints as exc:
            logger.debug("candidate target %.12g failed at radius %.6g: %s", q, radius, exc)
            return math.inf
        state[slot] = last = (u1, u2)
        best = min(best, e_pdelta)
        return e_pdelta

    def done() -> bool:
        return threshold is not None and best <= threshold

    attempt("lo", q_lo)
    if done():
        return best
    if q_hi - q_lo > 1e-12:
        attempt("hi", q_hi)
        if done():
            return best if math.isfinite(best) else None
        a, b = q_lo, q_hi
        x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
        f1, f2 = attempt("g0", x1), attempt("g1", x2)
        for i in range(2, _GSS_EVALS):
            if done():
                return best
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                f1 = attempt(f"g{i}", x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                f2 = attempt(f"g{i}", x2)
    return best if math.isfinite(best) else None


def _min_value_direct(
    problem_key: tuple[NoiseSpec, NoiseSpec, float],
    radius: float,
    q_lo: float,
    q_hi: float,
    state: dict[str, object],
    n_nodes: int,
) -> float | None:
    """Min of the dual value over targets in [q_lo, q_hi] using its convexity.

    The value of the constrained minimization is convex in the target level
    and is minimized where the second multiplier vanishes, so the interval
    minimum sits at the projection of that unconstrained target onto the
    interval: one single-multiplier solve, plus one pair solve when the
    interval does not contain it.  Radius searches lean on this; the public
    worst-case op keeps the golden-section evaluation."""
    spec_p, spec_q, pA = problem_key
    eng = _engine.Engine(spec_p, spec_q, radius, n_nodes)
    try:
        u1, _, value = eng.solve_single(pA, state.get("np"))
    except InfeasibleConstraints as exc:
        logger.debug("single-multiplier solve failed at radius %.6g: %s", radius, exc)
        return None
    state["np"] = u1
    q_np = eng.e_q(u1, 0.0)
    if q_lo <= q_np <= q_hi:
        return value
    q_t, slot = (q_lo, "lo") if q_np < q_lo else (q_hi, "hi")
    warm = state.get(slot)
    try:
        u1p, u2p, _, _, e_pdelta = eng.solve_pair(pA, q_t, warm)
    except InfeasibleConstraints as exc:
        logger.debug("endpoint target %.12g failed at radius %.6g: %s", q_t, radius, exc)
        return None
    state[slot] = (u1p, u2p)
    return e_pdelta


def dsrs_worst_case(problem: DsrsProblem, *, n_nodes: int = _engine.DEFAULT_NODES) -> float:
    """Smallest achievable shifted class probability over all classifiers
    meeting both constraints.

    A constraint interval covering the whole feasible range collapses to
    the single-law analysis; jointly infeasible constraints fall back to
    it with a warning, as do solver failures."""
    p = problem
    if p.pA_low in (0.0, 1.0):
        return p.pA_low
    if p.radius == 0.0:
        return p.pA_low
    plan = _interval_plan(p.spec_p, p.spec_q, p.pA_low, p.qA_low, p.qA_high)
    fallback_query = CertQuery(p.spec_p, p.pA_low, p.radius)
    if plan[0] == "infeasible":
        logger.warning(
            "qA interval [%.12g, %.12g] is infeasible against the primary bound "
            "%.12g; falling back to the single-law certificate",
            p.qA_low, p.qA_high, p.pA_low,
        )
        return np_worst_case(fallback_query)
    if plan[0] == "vacuous":
        return np_worst_case(fallback_query)
    if plan[0] == "corner":
        return _corner_value(p.spec_p, p.pA_low, p.radius, plan[1], n_nodes)
    if plan[0] == "point":
        eng = _engine.Engine(p.spec_p, p.spec_q, p.radius, n_nodes)
        try:
            return eng.solve_pair(p.pA_low, plan[1])[4]
        except InfeasibleConstraints:
            logger.warning(
                "degenerate target %.12g is unsolvable at radius %.6g; falling "
                "back to the single-law certificate", plan[1], p.radius,
            )
            return np_worst_case(fallback_query)
    value = _worst_case_core(
        (p.spec_p, p.spec_q, p.pA_low), p.radius, plan[1], plan[2],
        None, {}, n_nodes,
    )
    if value is None:
        logger.warning(
            "all dual solves failed at radius %.6g; falling back to the "
            "single-law certificate", p.radius,
        )
        return np_worst_case(fallback_query)
    return value


def dsrs_radius(
    problem: DsrsProblem,
    tol: float = DEFAULT_RADIUS_TOL,
    *,
    n_nodes: int = _engine.DEFAULT_NODES,
) -> float:
    """Largest radius on the standard bisection lattice whose two-law worst
    case stays above one half.  The problem's own radius field is ignored.

    Runs on the same lattice as the single-law radius search so the two
    radii are comparable step for step; warm-starts each dual solve from
    the neighbouring radius step."""
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")
    p = problem
    if p.pA_low <= 0.5:
        return 0.0
    plan = _interval_plan(p.spec_p, p.spec_q, p.pA_low, p.qA_low, p.qA_high)
    if plan[0] in ("infeasible", "vacuous"):
        if plan[0] == "infeasible":
            logger.warning(
                "qA interval [%.12g, %.12g] is infeasible against the primary bound "
                "%.12g; certifying with the single law only",
                p.qA_low, p.qA_high, p.pA_low,
            )
        return np_radius(p.spec_p, p.pA_low, tol)
    r_max = RADIUS_CAP_FACTOR * p.spec_p.sigma_prime
    state: dict[str, object] = {}
    key = (p.spec_p, p.spec_q, p.pA_low)

    def np_certified_at(r: float) -> bool:
        # dominance makes the single-law decision a sound stand-in
        return np_worst_case(CertQuery(p.spec_p, p.pA_low, r)) > 0.5

    def certified_at(r: float) -> bool:
        if plan[0] == "corner":
            return _corner_value(p.spec_p, p.pA_low, r, plan[1], n_nodes) > 0.5
        if plan[0] == "point":
            eng = _engine.Engine(p.spec_p, p.spec_q, r, n_nodes)
            try:
                solved = eng.solve_pair(p.pA_low, plan[1], state.get("pt"))
            except InfeasibleConstraints:
                return np_certified_at(r)
            state["pt"] = (solved[0], solved[1])
            return solved[4] > 0.5
        value = _min_value_direct(key, r, plan[1], plan[2], state, n_nodes)
        if value is None:
            return np_certified_at(r)
        return value > 0.5

    return _engine.radius_bisect(certified_at, r_max, tol)
