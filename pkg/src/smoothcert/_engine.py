"""Quadrature engine and dual solver behind the worst-case analyses.

Everything reduces to one dimension.  Fix the shift direction; every
density involved depends only on the radius t = ||z|| and the shifted
radius s = ||z - delta||, with s^2 = t^2 + r^2 - 2 t r c for direction
cosine c.  The worst-case acceptance set {p_delta <= lambda1 p + lambda2 q}
is therefore, per radius t, a set of direction cosines whose probability
mass is an angular-CDF expression, and each expectation is the integral
of that angular mass against the relevant radial law, evaluated by
quantile-transformed composite midpoint quadrature.

The acceptance condition is evaluated in log space with explicit sign
handling (multipliers may be negative, and at d in the thousands the
densities only exist as logs).  Per radial node the condition is sign
tested on a coarse cosine grid, each sign change is refined by bisection,
and the angular mass is assembled from the refined crossings.

Multipliers live on a signed-log axis u with |lambda| = e^(|u| - B) for a
fixed shift B (lambda = 0 at u = 0): optimal multipliers range over
exp(+-Theta(d)) in the high-dimensional regimes this engine must certify
(density ratios between two sigmas span e^(+-d ln(sigma_p/sigma_q))), so
both astronomically large and astronomically small magnitudes need
uniform relative resolution.  Bracketing and bisection happen in u-space,
where that whole range is a few thousand units wide.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .distributions import NoiseSpec, _log_norm_const, angular_cdf, radial_quantile
from .errors import InfeasibleConstraints

logger = logging.getLogger(__name__)

DEFAULT_NODES = 512
_C_GRID_POINTS = 64
_CROSS_ITERS = 32
PROB_TOL = 1e-6
_RESIDUAL_GATE = 2e-5     # accept solves whose residual is within this of tol
_B = 4200.0               # log-axis shift: |lambda| = e^(|u| - B)
_U_SPAN = 3500.0          # |ln lambda| coverage on either side of 1
_U_MAX = _B + _U_SPAN
_BISECT_ITERS = 90
_POLE_CLAMP = 1e-150      # keeps log densities finite on the measure-zero s=0 set


def u_to_lambda(u: float) -> float:
    """Signed-log axis to linear multiplier.  Magnitudes beyond the float
    range saturate to +-inf / 0.0."""
    if u == 0.0:
        return 0.0
    ln_mag = abs(u) - _B
    if ln_mag > 700.0:
        return math.copysign(math.inf, u)
    if ln_mag < -700.0:
        return math.copysign(0.0, u)
    return math.copysign(math.exp(ln_mag), u)


def u_from_lambda(lam: float) -> float:
    if lam == 0.0:
        return 0.0
    if not math.isfinite(lam):
        raise ValueError("multipliers must be finite")
    return math.copysign(_B + math.log(abs(lam)), lam)


def _u_to_sign_log(u: float) -> tuple[float, float]:
    if u == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, u), abs(u) - _B


def _density_params(spec: NoiseSpec) -> tuple[float, float, float]:
    return (_log_norm_const(spec), 2.0 * spec.k, 1.0 / (2.0 * spec.sigma_prime**2))


def _log_density(params: tuple[float, float, float], s: np.ndarray) -> np.ndarray:
    ln_c, two_k, inv_two_var = params
    out = ln_c - s * s * inv_two_var
    if two_k != 0.0:
        out = out - two_k * np.log(np.maximum(s, _POLE_CLAMP))
    return out


@lru_cache(maxsize=32)
def _quantile_nodes(spec: NoiseSpec, n_nodes: int) -> np.ndarray:
    """Midpoint quantile grid of the radial law; radius-independent, so it
    is shared across every workspace touching this (law, resolution)."""
    u = (np.arange(n_nodes) + 0.5) / n_nodes
    nodes = np.asarray(radial_quantile(spec, u))
    nodes.setflags(write=False)
    return nodes


def _signed_sum_log(
    s1: float, a1: np.ndarray, s2: float, a2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log-magnitude of s1 e^a1 + s2 e^a2 (a may be -inf)."""
    m = np.maximum(a1, a2)
    finite = np.isfinite(m)
    v = np.zeros(np.shape(m))
    with np.errstate(invalid="ignore"):
        np.add(
            s1 * np.exp(np.where(finite, a1 - m, -np.inf)),
            s2 * np.exp(np.where(finite, a2 - m, -np.inf)),
            out=v,
        )
    sign = np.sign(v)
    with np.errstate(divide="ignore"):
        ln = np.where(finite & (v != 0.0), m + np.log(np.abs(v)), -np.inf)
    return sign, ln


class _Workspace:
    """Multiplier-independent geometry for one (P, Q, radius, nodes) tuple.

    Node grids, per-node log densities, and the coarse-cosine log-density
    matrices are all reusable across every dual iteration at this radius,
    which is what makes the nested bisections affordable.
    """

    def __init__(self, spec_p: NoiseSpec, spec_q: NoiseSpec, radius: float, n_nodes: int):
        if radius <= 0.0:
            raise ValueError("workspace requires radius > 0; radius 0 is an identity")
        self.spec_p = spec_p
        self.spec_q = spec_q
        self.radius = radius
        self.n_nodes = n_nodes
        self.d = spec_p.d
        self.params_p = _density_params(spec_p)
        self.params_q = _density_params(spec_q)
        self.c_grid = np.linspace(-1.0, 1.0, _C_GRID_POINTS)
        self._sets: dict[str, dict[str, np.ndarray]] = {}

    def _nodes(self, spec: NoiseSpec) -> np.ndarray:
        return _quantile_nodes(spec, self.n_nodes)

    def forward_set(self, which: str) -> dict[str, np.ndarray]:
        """Node data for E_P ('p') or E_Q ('q'): the integration variable is
        the radius t under that law; the shifted radius is s(t, c)."""
        key = f"fwd_{which}"
        if key not in self._sets:
            spec = self.spec_p if which == "p" else self.spec_q
            t = self._nodes(spec)
            r = self.radius
            s_sq = t[:, None] ** 2 + r * r - 2.0 * r * t[:, None] * self.c_grid
            s = np.sqrt(np.maximum(s_sq, 0.0))
            self._sets[key] = {
                "t": t,
                "ln_p_t": _log_density(self.params_p, t),
                "ln_q_t": _log_density(self.params_q, t),
                "ln_pd_mat": _log_density(self.params_p, s),
            }
        return self._sets[key]

    def shifted_set(self) -> dict[str, np.ndarray]:
        """Node data for E_{P_delta}: substituting z = y + delta with y ~ P,
        the integration radius a = ||y|| follows P's radial law while the
        acceptance condition is evaluated at ||z|| = s(a, -c)."""
        if "shifted" not in self._sets:
            a = self._nodes(self.spec_p)
            r = self.radius
            s_sq = a[:, None] ** 2 + r * r + 2.0 * r * a[:, None] * self.c_grid
            s = np.sqrt(np.maximum(s_sq, 0.0))
            self._sets["shifted"] = {
                "t": a,
                "ln_p_a": _log_density(self.params_p, a),
                "ln_p_mat": _log_density(self.params_p, s),
                "ln_q_mat": _log_density(self.params_q, s),
            }
        return self._sets["shifted"]


# Workspaces are small (a few MB) and radius steps revisit them heavily.
@lru_cache(maxsize=6)
def _workspace(spec_p: NoiseSpec, spec_q: NoiseSpec, radius: float, n_nodes: int) -> _Workspace:
    return _Workspace(spec_p, spec_q, radius, n_nodes)


def _assemble_measures(
    accept: np.ndarray,
    c_grid: np.ndarray,
    d: int,
    refine: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """Per-row angular mass of the acceptance set from its sign pattern.

    accept: (rows, c-grid) boolean.  refine(rows_idx, c) re-evaluates
    acceptance at arbitrary cosines for the given rows; it is called only
    on rows with sign changes, ~32 times for the crossing bisection.
    Mass = [accept at c=1] + sum over accept->reject crossings of A(c*)
    - sum over reject->accept crossings of A(c*), the telescoped form of
    summing A-differences over accepted runs.
    """
    measures = accept[:, -1].astype(np.float64)
    change = accept[:, :-1] != accept[:, 1:]
    if not change.any():
        return measures
    rows, cols = np.nonzero(change)
    lo = c_grid[cols].copy()
    hi = c_grid[cols + 1].copy()
    state_lo = accept[rows, cols]
    for _ in range(_CROSS_ITERS):
        mid = 0.5 * (lo + hi)
        same = refine(rows, mid) == state_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    crossing = 0.5 * (lo + hi)
    mass = np.asarray(angular_cdf(d, np.clip(crossing, -1.0, 1.0)))
    contrib = np.where(state_lo, mass, -mass)
    np.add.at(measures, rows, contrib)
    return measures


class Engine:
    """Expectation evaluator and dual solver bound to one geometry.

    Multipliers are passed on the signed-log u axis throughout; linear
    lambdas exist only at the public API boundary.
    """

    def __init__(self, spec_p: NoiseSpec, spec_q: NoiseSpec, radius: float,
                 n_nodes: int = DEFAULT_NODES):
        self.ws = _workspace(spec_p, spec_q, float(radius), int(n_nodes))

    # -- expectation evaluation ------------------------------------------

    def _forward_measures(self, which: str, u1: float, u2: float) -> np.ndarray:
        ws = self.ws
        data = ws.forward_set(which)
        s1, l1 = _u_to_sign_log(u1)
        s2, l2 = _u_to_sign_log(u2)
        w_sign, ln_w = _signed_sum_log(s1, l1 + data["ln_p_t"], s2, l2 + data["ln_q_t"])
        positive = w_sign > 0.0
        accept = positive[:, None] & (data["ln_pd_mat"] <= ln_w[:, None])
        t = data["t"]
        r = ws.radius

        def refine(rows: np.ndarray, c: np.ndarray) -> np.ndarray:
            s_sq = t[rows] ** 2 + r * r - 2.0 * r * t[rows] * c
            ln_pd = _log_density(ws.params_p, np.sqrt(np.maximum(s_sq, 0.0)))
            return positive[rows] & (ln_pd <= ln_w[rows])

        return _assemble_measures(accept, ws.c_grid, ws.d, refine)

    def _shifted_measures(self, u1: float, u2: float) -> np.ndarray:
        ws = self.ws
        data = ws.shifted_set()
        s1, l1 = _u_to_sign_log(u1)
        s2, l2 = _u_to_sign_log(u2)
        w_sign, ln_w = _signed_sum_log(
            s1, l1 + data["ln_p_mat"], s2, l2 + data["ln_q_mat"]
        )
        accept = (w_sign > 0.0) & (data["ln_p_a"][:, None] <= ln_w)
        a = data["t"]
        r = ws.radius
        ln_p_a = data["ln_p_a"]

        def refine(rows: np.ndarray, c: np.ndarray) -> np.ndarray:
            s_sq = a[rows] ** 2 + r * r + 2.0 * r * a[rows] * c
            s = np.sqrt(np.maximum(s_sq, 0.0))
            rs, rl = _signed_sum_log(
                s1, l1 + _log_density(ws.params_p, s),
                s2, l2 + _log_density(ws.params_q, s),
            )
            return (rs > 0.0) & (ln_p_a[rows] <= rl)

        return _assemble_measures(accept, ws.c_grid, ws.d, refine)

    def e_p(self, u1: float, u2: float) -> float:
        return float(np.mean(self._forward_measures("p", u1, u2)))

    def e_q(self, u1: float, u2: float) -> float:
        return float(np.mean(self._forward_measures("q", u1, u2)))

    def e_pdelta(self, u1: float, u2: float) -> float:
        return float(np.mean(self._shifted_measures(u1, u2)))

    # -- bracketing and bisection on the u axis ---------------------------

    @staticmethod
    def _ladder() -> list[float]:
        # rung magnitudes cluster log-geometrically around |lambda| = 1
        # (u = B), where the transitions of well-conditioned problems live
        offsets = [0.0, _U_SPAN, -_U_SPAN]
        v = 1.0
        while v < _U_SPAN:
            offsets.extend((v, -v))
            v *= 2.0
        mags = sorted({_B + o for o in offsets})
        return sorted([0.0] + mags + [-m for m in mags])

    def _bracket_on_ladder(
        self, fn: Callable[[float], float], target: float
    ) -> tuple[float, float, float, float] | None:
        """Adjacent ladder rungs (lo, hi, f_lo, f_hi) straddling the target
        of a nondecreasing fn, or None when the whole axis lies on one side."""
        rungs = self._ladder()
        f_lo = fn(rungs[0])
        if f_lo > target:
            return None
        f_hi = fn(rungs[-1])
        if f_hi < target:
            return None
        lo_i, hi_i = 0, len(rungs) - 1
        while hi_i - lo_i > 1:
            mid_i = (lo_i + hi_i) // 2
            f_mid = fn(rungs[mid_i])
            if f_mid < target:
                lo_i, f_lo = mid_i, f_mid
            else:
                hi_i, f_hi = mid_i, f_mid
        return rungs[lo_i], rungs[hi_i], f_lo, f_hi

    def _solve_monotone(
        self,
        fn: Callable[[float], float],
        target: float,
        warm: float | None,
    ) -> tuple[float, float]:
        """Solve fn(u) = target for nondecreasing fn; returns (u, fn(u)).

        Tries a narrow bracket around the warm start first, then the
        geometric ladder.  Terminates on |fn - target| <= PROB_TOL or on
        bracket collapse (validated by the caller)."""
        lo = hi = f_lo = f_hi = None
        if warm is not None and abs(warm) < _U_MAX:
            width = 0.35
            for _ in range(3):
                c_lo = max(warm - width, -_U_MAX)
                c_hi = min(warm + width, _U_MAX)
                v_lo, v_hi = fn(c_lo), fn(c_hi)
                if v_lo <= target <= v_hi:
                    lo, hi, f_lo, f_hi = c_lo, c_hi, v_lo, v_hi
                    break
                width *= 4.0
        if lo is None:
            bracket = self._bracket_on_ladder(fn, target)
            if bracket is None:
                # the axis saturates below/above the target: report the
                # attainable endpoint and let the caller judge the residual
                end = _U_MAX if fn(_U_MAX) < target else -_U_MAX
                return end, fn(end)
            lo, hi, f_lo, f_hi = bracket
        if abs(f_lo - target) <= PROB_TOL:
            return lo, f_lo
        if abs(f_hi - target) <= PROB_TOL:
            return hi, f_hi
        best_u, best_f = (lo, f_lo) if abs(f_lo - target) < abs(f_hi - target) else (hi, f_hi)
        # Illinois false position: superlinear on the smooth stretches,
        # degrading to bisection on plateaus and stalls
        r_lo, r_hi = f_lo - target, f_hi - target
        side = 0
        for _ in range(_BISECT_ITERS):
            denom = r_hi - r_lo
            if denom > 0.0 and math.isfinite(denom):
                x = (lo * r_hi - hi * r_lo) / denom
                if not (lo < x < hi):
                    x = 0.5 * (lo + hi)
            else:
                x = 0.5 * (lo + hi)
            f_x = fn(x)
            if abs(f_x - target) < abs(best_f - target):
                best_u, best_f = x, f_x
            if abs(f_x - target) <= PROB_TOL:
                return x, f_x
            if f_x < target:
                lo, r_lo = x, f_x - target
                if side == -1:
                    r_hi *= 0.5
                side = -1
            else:
                hi, r_hi = x, f_x - target
                if side == 1:
                    r_lo *= 0.5
                side = 1
            if hi - lo <= 1e-12 * max(1.0, abs(x)):
                break
        return best_u, best_f

    # -- dual solves -------------------------------------------------------

    def solve_single(self, pA: float, warm: float | None = None) -> tuple[float, float, float]:
        """lambda2 = 0 solve: match e_p = pA with the single multiplier.

        Returns (u1, e_p, e_pdelta)."""
        u1, f1 = self._solve_monotone(lambda u: self.e_p(u, 0.0), pA, warm)
        if abs(f1 - pA) > _RESIDUAL_GATE:
            raise InfeasibleConstraints(
                "single-multiplier solve could not match the probability constraint",
                target=pA, achieved=f1, u1=u1, radius=self.ws.radius,
            )
        return u1, f1, self.e_pdelta(u1, 0.0)

    def solve_pair(
        self,
        pA: float,
        q_target: float,
        warm: tuple[float, float] | None = None,
    ) -> tuple[float, float, float, float, float]:
        """Nested solve of e_p = pA (outer, u1) and e_q = q_target (inner, u2).

        Returns (u1, u2, e_p, e_q, e_pdelta).  The inner warm start chains
        across outer iterations, which is what keeps the iteration count
        manageable."""
        inner_warm = warm[1] if warm is not None else None
        state: dict[str, float] = {}

        def solved_e_p(u1: float) -> float:
            nonlocal inner_warm
            u2, f_q = self._solve_monotone(
                lambda u: self.e_q(u1, u), q_target, inner_warm
            )
            inner_warm = u2
            state["u1"], state["u2"], state["e_q"] = u1, u2, f_q
            return self.e_p(u1, u2)

        u1, f_p = self._solve_monotone(solved_e_p, pA, warm[0] if warm else None)
        if state.get("u1") != u1:
            f_p = solved_e_p(u1)
        if abs(f_p - pA) > _RESIDUAL_GATE or abs(state["e_q"] - q_target) > _RESIDUAL_GATE:
            u1, f_p = self._scan_fallback(solved_e_p, pA, state)
        if abs(f_p - pA) > _RESIDUAL_GATE or abs(state["e_q"] - q_target) > _RESIDUAL_GATE:
            raise InfeasibleConstraints(
                "dual solve could not match the joint probability constraints",
                p_target=pA, p_achieved=f_p,
                q_target=q_target, q_achieved=state["e_q"],
                u1=u1, u2=state["u2"], radius=self.ws.radius,
            )
        u2 = state["u2"]
        return u1, u2, f_p, state["e_q"], self.e_pdelta(u1, u2)

    def _scan_fallback(
        self, solved_e_p: Callable[[float], float], pA: float, state: dict[str, float]
    ) -> tuple[float, float]:
        """256-point scan over u1 with local refinement: the rescue path when
        the outer map is not monotone enough for plain bisection."""
        grid = np.linspace(-_U_MAX, _U_MAX, 256)
        best_u, best_f = math.nan, math.inf
        prev_u, prev_f = None, None
        bracket = None
        for u in grid:
            f = solved_e_p(float(u))
            if abs(f - pA) < abs(best_f - pA):
                best_u, best_f = float(u), f
            if prev_f is not None and (prev_f - pA) * (f - pA) <= 0.0:
                bracket = (prev_u, float(u), prev_f, f)
                break
            prev_u, prev_f = float(u), f
        if bracket is not None:
            lo, hi, _, _ = bracket
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                f_mid = solved_e_p(mid)
                if abs(f_mid - pA) < abs(best_f - pA):
                    best_u, best_f = mid, f_mid
                if abs(f_mid - pA) <= PROB_TOL:
                    break
                if f_mid < pA:
                    lo = mid
                else:
                    hi = mid
        best_f = solved_e_p(best_u)  # leave `state` at the reported point
        return best_u, best_f


def adaptive_expectations(
    spec_p: NoiseSpec,
    spec_q: NoiseSpec,
    radius: float,
    u1: float,
    u2: float,
    base_nodes: int = DEFAULT_NODES,
    rel_change: float = 1e-7,
    max_nodes: int = 8192,
) -> tuple[float, float, float]:
    """The three expectations with node doubling until successive estimates
    move by less than rel_change.

    At d = 2 the angular law's endpoint derivative blows up, the integrand
    picks up square-root kinks, and the settle threshold may be out of
    reach in bounded memory; the last estimate is then returned with a
    warning (its error is far below any tolerance used at that dimension)."""
    n = base_nodes
    eng = Engine(spec_p, spec_q, radius, n)
    prev = (eng.e_p(u1, u2), eng.e_q(u1, u2), eng.e_pdelta(u1, u2))
    while n < max_nodes:
        n *= 2
        eng = Engine(spec_p, spec_q, radius, n)
        cur = (eng.e_p(u1, u2), eng.e_q(u1, u2), eng.e_pdelta(u1, u2))
        if max(abs(a - b) for a, b in zip(cur, prev)) < rel_change:
            return cur
        prev = cur
    logger.warning(
        "expectations did not settle to %.1g within %d nodes; returning the "
        "finest estimate", rel_change, max_nodes,
    )
    return prev


def radius_bisect(certified_at: Callable[[float], bool], r_max: float, tol: float) -> float:
    """Largest radius on the shared bisection lattice with certified_at true.

    Both certification methods must search on this exact lattice so their
    radii are comparable step for step."""
    if certified_at(r_max):
        return r_max
    lo, hi = 0.0, r_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if certified_at(mid):
            lo = mid
        else:
            hi = mid
    return lo
