"""Two-distribution certification against brute-force oracles.

The dual engine is checked three independent ways: polar-grid quadrature
of the acceptance-set expectations, a discretized linear program over
cell indicator weights, and direct Monte Carlo of the boundary-set path.
Structural identities (degenerate intervals, zero radius, equal laws)
pin the reductions to the single-constraint certificate.
"""

import logging
import math

import numpy as np
import pytest

from oracles import grid_expectations_2d, lp_worst_case
from smoothcert import (
    DsrsProblem,
    NoiseSpec,
    dsrs_radius,
    dsrs_worst_case,
    expectations,
    feasible_q_range,
    np_radius,
    np_worst_case,
    solve_duals,
)
from smoothcert.distributions import radial_cdf, radial_quantile
from smoothcert.errors import InfeasibleConstraints
from smoothcert.neyman_pearson import CertQuery

STD2 = NoiseSpec("standard-gaussian", 1.0, 0, 2)
GEN2_HALF = NoiseSpec("general-gaussian", 0.5, 0, 2)

# acceptance-set expectations checked pointwise against a 1200x1200 polar
# grid; the oracle reads raw vector densities at cell centers and never
# touches the quadrature change of variables used by the engine
GRID_CONFIGS = [
    (STD2, GEN2_HALF, 0.8, 1.2, -0.3),
    (STD2, GEN2_HALF, 1.3, 0.7, 0.4),
    (
        NoiseSpec("general-gaussian", 0.8, 0, 2),
        NoiseSpec("general-gaussian", 0.5, 0, 2),
        0.4,
        2.0,
        -0.8,
    ),
]

# shifted mass of the pinned radial set, by 4e6-draw direct Monte Carlo
# (seed 11); tolerances sit at roughly five standard errors
CORNER_MASS_TABLE = [
    ("d2-ball", STD2, NoiseSpec("general-gaussian", 0.6, 0, 2),
     0.9, 0.5, "ball", 0.870865, 8e-4),
    ("d12-ball", NoiseSpec("general-gaussian", 0.5, 3, 12),
     NoiseSpec("general-gaussian", 0.4, 3, 12), 0.95, 0.3, "ball",
     0.944845, 6e-4),
    ("d12-shell", NoiseSpec("general-gaussian", 0.5, 3, 12),
     NoiseSpec("general-gaussian", 0.4, 3, 12), 0.95, 0.3, "shell",
     0.957933, 6e-4),
    ("d64-ball", NoiseSpec("general-gaussian", 0.5, 24, 64),
     NoiseSpec("general-gaussian", 0.45, 24, 64), 0.999, 1.0, "ball",
     0.998430, 1.2e-4),
]


def _dummy_problem(spec_p, spec_q, radius):
    # expectations() only reads the laws and the radius from the problem
    return DsrsProblem(spec_p, spec_q, 0.5, 0.0, 1.0, radius)


def _boundary_target(spec_p, spec_q, pA, side):
    """Secondary-law mass of the ball (or its complement) carrying primary
    mass pA; these are the endpoints of the feasible range."""
    if side == "ball":
        thr = float(radial_quantile(spec_p, pA))
        return float(radial_cdf(spec_q, thr))
    thr = float(radial_quantile(spec_p, 1.0 - pA))
    return 1.0 - float(radial_cdf(spec_q, thr))


class TestExpectations:
    def test_zero_multipliers_give_empty_region(self):
        prob = _dummy_problem(STD2, GEN2_HALF, 0.8)
        assert expectations(prob, 0.0, 0.0) == (0.0, 0.0, 0.0)

    def test_negative_combination_gives_empty_region(self):
        prob = _dummy_problem(STD2, GEN2_HALF, 0.8)
        e_p, e_q, e_pd = expectations(prob, -0.5, -0.3)
        assert e_p == 0.0 and e_q == 0.0 and e_pd == 0.0

    def test_huge_multiplier_gives_full_region(self):
        prob = _dummy_problem(STD2, GEN2_HALF, 0.8)
        e_p, e_q, e_pd = expectations(prob, 1e12, 0.0)
        assert e_p == pytest.approx(1.0, abs=1e-9)
        assert e_q == pytest.approx(1.0, abs=1e-9)
        assert e_pd == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("spec_p,spec_q,radius,lam1,lam2", GRID_CONFIGS)
    def test_matches_polar_grid_oracle(self, spec_p, spec_q, radius, lam1, lam2):
        prob = _dummy_problem(spec_p, spec_q, radius)
        got = expectations(prob, lam1, lam2)
        want = grid_expectations_2d(spec_p, spec_q, radius, lam1, lam2)
        for g, w in zip(got, want):
            assert g == pytest.approx(w, abs=1e-3)

    def test_zero_radius_identity(self):
        """With no shift the shifted law is the sampling law itself."""
        prob0 = _dummy_problem(GEN2_HALF, STD2, 0.0)
        e_p0, e_q0, e_pd0 = expectations(prob0, 1.5, -0.2)
        assert e_pd0 == e_p0
        probe = _dummy_problem(GEN2_HALF, STD2, 1e-6)
        e_p, e_q, e_pd = expectations(probe, 1.5, -0.2)
        assert e_p0 == pytest.approx(e_p, abs=1e-4)
        assert e_q0 == pytest.approx(e_q, abs=1e-4)
        assert abs(e_pd - e_p) < 1e-4

    def test_region_grows_with_first_multiplier(self):
        prob = _dummy_problem(STD2, GEN2_HALF, 0.8)
        rows = [expectations(prob, lam1, -0.3) for lam1 in (-0.5, 0.0, 0.7, 1.5, 3.0)]
        for lo, hi in zip(rows, rows[1:]):
            assert hi[0] >= lo[0] - 1e-9
            assert hi[1] >= lo[1] - 1e-9
            assert hi[2] >= lo[2] - 1e-9


class TestSolveDuals:
    def test_recovers_both_constraints(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.8)
        point = solve_duals(prob, 0.999)
        assert point.e_p == pytest.approx(0.9, abs=1e-5)
        assert point.e_q == pytest.approx(0.999, abs=1e-5)

    def test_point_matches_linear_program(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.8)
        point = solve_duals(prob, 0.999)
        want = lp_worst_case(STD2, GEN2_HALF, 0.9, 0.999, 0.999, 0.8)
        assert point.e_pdelta == pytest.approx(want, abs=1e-2)

    def test_multipliers_reproduce_the_point(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.8)
        point = solve_duals(prob, 0.999)
        e_p, e_q, e_pd = expectations(prob, point.lambda1, point.lambda2)
        assert e_p == pytest.approx(point.e_p, abs=5e-4)
        assert e_q == pytest.approx(point.e_q, abs=5e-4)
        assert e_pd == pytest.approx(point.e_pdelta, abs=5e-4)

    def test_equal_laws_reduce_to_single_constraint(self):
        spec = NoiseSpec("general-gaussian", 0.5, 2, 10)
        prob = DsrsProblem(spec, spec, 0.85, 0.85, 0.85, 0.6)
        point = solve_duals(prob, 0.85)
        assert point.lambda2 == 0.0
        want = np_worst_case(CertQuery(spec, 0.85, 0.6))
        assert point.e_pdelta == pytest.approx(want, abs=1e-4)
        e_p, _, e_pd = expectations(prob, point.lambda1, point.lambda2)
        assert e_p == pytest.approx(0.85, abs=5e-4)
        assert e_pd == pytest.approx(point.e_pdelta, abs=5e-4)

    def test_equal_laws_contradictory_target_raises(self):
        spec = NoiseSpec("general-gaussian", 0.5, 2, 10)
        prob = DsrsProblem(spec, spec, 0.85, 0.85, 0.85, 0.6)
        with pytest.raises(InfeasibleConstraints):
            solve_duals(prob, 0.7)

    def test_zero_radius_trivial_point(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.99, 0.999, 0.0)
        point = solve_duals(prob, 0.99)
        assert point.e_p == 0.9
        assert point.e_q == 0.99
        assert point.e_pdelta == 0.9
        assert math.isnan(point.lambda1) and math.isnan(point.lambda2)

    def test_rejects_boundary_targets(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.0, 1.0, 0.8)
        with pytest.raises(ValueError):
            solve_duals(prob, 0.0)
        with pytest.raises(ValueError):
            solve_duals(prob, 1.0)


class TestFeasibleRange:
    def test_equal_laws_collapse_to_point(self):
        spec = NoiseSpec("general-gaussian", 0.5, 2, 10)
        assert feasible_q_range(spec, spec, 0.85) == (0.85, 0.85)

    def test_mixed_ratio_shape_returns_full_range(self):
        spec_p = NoiseSpec("general-gaussian", 0.5, 2, 8)
        spec_q = NoiseSpec("general-gaussian", 0.4, 0, 8)
        assert feasible_q_range(spec_p, spec_q, 0.8) == (0.0, 1.0)

    def test_monotone_ratio_endpoints_are_radial_sets(self):
        # narrower secondary law: the ratio q/p falls in the radius, so
        # the top of the range is the central ball and the bottom its
        # complementary shell
        spec_p = NoiseSpec("general-gaussian", 0.5, 0, 6)
        spec_q = NoiseSpec("general-gaussian", 0.4, 0, 6)
        pA = 0.72
        lo, hi = feasible_q_range(spec_p, spec_q, pA)
        assert hi == pytest.approx(_boundary_target(spec_p, spec_q, pA, "ball"), abs=1e-9)
        assert lo == pytest.approx(_boundary_target(spec_p, spec_q, pA, "shell"), abs=1e-9)
        assert 0.0 < lo < hi < 1.0

    def test_certain_bound_stays_certain(self):
        spec_p = NoiseSpec("general-gaussian", 0.5, 0, 6)
        spec_q = NoiseSpec("general-gaussian", 0.4, 0, 6)
        assert feasible_q_range(spec_p, spec_q, 1.0) == (1.0, 1.0)
        assert feasible_q_range(spec_p, spec_q, 0.0) == (0.0, 0.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            feasible_q_range(STD2, NoiseSpec("general-gaussian", 0.5, 0, 4), 0.8)


class TestWorstCase:
    def test_vacuous_interval_equals_single_law(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.0, 1.0, 0.8)
        assert dsrs_worst_case(prob) == np_worst_case(CertQuery(STD2, 0.9, 0.8))

    def test_equal_laws_degenerate_interval_equals_single_law(self):
        spec = NoiseSpec("general-gaussian", 0.5, 2, 10)
        prob = DsrsProblem(spec, spec, 0.85, 0.85, 0.85, 0.6)
        assert dsrs_worst_case(prob) == np_worst_case(CertQuery(spec, 0.85, 0.6))

    def test_zero_radius_returns_bound(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.0)
        assert dsrs_worst_case(prob) == 0.9
        qt = _boundary_target(STD2, GEN2_HALF, 0.9, "ball")
        corner = DsrsProblem(STD2, GEN2_HALF, 0.9, qt, qt, 0.0)
        assert dsrs_worst_case(corner) == 0.9

    def test_informative_interval_beats_single_law(self):
        """A secondary bound near the top of the feasible range rules out
        the single-law worst case; the gain is real, not solver noise."""
        prob = DsrsProblem(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.8)
        got = dsrs_worst_case(prob)
        baseline = np_worst_case(CertQuery(STD2, 0.9, 0.8))
        assert got >= baseline + 0.01
        want = lp_worst_case(STD2, GEN2_HALF, 0.9, 0.9985, 0.999, 0.8)
        assert got == pytest.approx(want, abs=1e-2)

    @pytest.mark.parametrize(
        "name,spec_p,spec_q,pA,radius,side,mass,tol",
        CORNER_MASS_TABLE,
        ids=[row[0] for row in CORNER_MASS_TABLE],
    )
    def test_boundary_interval_matches_direct_sampling(
        self, name, spec_p, spec_q, pA, radius, side, mass, tol
    ):
        qt = _boundary_target(spec_p, spec_q, pA, side)
        prob = DsrsProblem(spec_p, spec_q, pA, qt, qt, radius)
        assert dsrs_worst_case(prob) == pytest.approx(mass, abs=tol)

    def test_infeasible_interval_warns_and_falls_back(self, caplog):
        spec_p = NoiseSpec("general-gaussian", 0.5, 0, 6)
        spec_q = NoiseSpec("general-gaussian", 0.4, 0, 6)
        pA = 0.72
        _, hi = feasible_q_range(spec_p, spec_q, pA)
        prob = DsrsProblem(spec_p, spec_q, pA, min(hi + 0.02, 1.0), 1.0, 0.4)
        with caplog.at_level(logging.WARNING, logger="smoothcert.dsrs"):
            got = dsrs_worst_case(prob)
        assert got == np_worst_case(CertQuery(spec_p, pA, 0.4))
        assert any("infeasible" in rec.message for rec in caplog.records)

    def test_dominance_over_single_law(self):
        """Adding a constraint can only shrink the feasible classifier set,
        so the certified value never drops below the single-law one (up to
        shared quadrature tolerance)."""
        rng = np.random.default_rng(7)
        for _ in range(6):
            d = int(rng.choice([4, 8, 16]))
            k = int(rng.integers(0, (d - 2) // 2 + 1))
            sigma_p = float(rng.uniform(0.4, 1.0))
            sigma_q = sigma_p * float(rng.uniform(0.5, 0.95))
            spec_p = NoiseSpec("general-gaussian", sigma_p, k, d)
            spec_q = NoiseSpec("general-gaussian", sigma_q, k, d)
            pA = float(rng.uniform(0.55, 0.99))
            lo, hi = feasible_q_range(spec_p, spec_q, pA)
            width = hi - lo
            a = lo + width * float(rng.uniform(0.05, 0.5))
            b = min(hi - width * 0.05, a + width * float(rng.uniform(0.05, 0.4)))
            radius = float(rng.uniform(0.2, 1.2)) * sigma_p
            prob = DsrsProblem(spec_p, spec_q, pA, a, max(a, b), radius)
            got = dsrs_worst_case(prob)
            baseline = np_worst_case(CertQuery(spec_p, pA, radius))
            assert got >= baseline - 1e-4, (
                f"d={d} k={k} sigma_p={sigma_p:.3f} sigma_q={sigma_q:.3f} "
                f"pA={pA:.4f} q=[{a:.4f},{b:.4f}] r={radius:.3f}"
            )


class TestRadiusSearch:
    def test_uncertified_bound_gives_zero(self):
        prob = DsrsProblem(STD2, GEN2_HALF, 0.45, 0.0, 1.0, 1.0)
        assert dsrs_radius(prob) == 0.0

    def test_vacuous_interval_matches_single_law_search(self):
        spec = NoiseSpec("general-gaussian", 0.5, 2, 10)
        degenerate = DsrsProblem(spec, spec, 0.85, 0.85, 0.85, 1.0)
        full = DsrsProblem(spec, spec, 0.85, 0.0, 1.0, 1.0)
        want = np_radius(spec, 0.85)
        assert dsrs_radius(degenerate) == want
        assert dsrs_radius(full) == want

    def test_halfspace_constraint_is_tight(self):
        """An affine classifier's exact secondary mass must not push the
        radius past the point where that classifier itself flips."""
        from smoothcert._special import normal_cdf

        spec_p = NoiseSpec("general-gaussian", 0.5, 0, 6)
        spec_q = NoiseSpec("general-gaussian", 0.4, 0, 6)
        tau = 0.3
        pA = float(normal_cdf(tau / spec_p.sigma))
        qA = float(normal_cdf(tau / spec_q.sigma))
        got = dsrs_radius(DsrsProblem(spec_p, spec_q, pA, qA, qA, 1.0))
        baseline = np_radius(spec_p, pA)
        assert got >= baseline - 1e-9
        assert got == pytest.approx(tau, abs=1e-3)
        assert baseline == pytest.approx(tau, abs=1e-3)

    def test_tighter_interval_never_hurts(self):
        spec_p = NoiseSpec("general-gaussian", 0.5, 2, 8)
        spec_q = NoiseSpec("general-gaussian", 0.4, 2, 8)
        pA = 0.9
        qb = _boundary_target(spec_p, spec_q, pA, "ball")
        r_corner = dsrs_radius(DsrsProblem(spec_p, spec_q, pA, qb, qb, 1.0))
        r_mid = dsrs_radius(DsrsProblem(spec_p, spec_q, pA, qb - 0.03, qb, 1.0))
        r_wide = dsrs_radius(DsrsProblem(spec_p, spec_q, pA, qb - 0.12, qb, 1.0))
        r_np = np_radius(spec_p, pA)
        assert r_corner >= r_mid - 1e-12
        assert r_mid >= r_wide - 1e-12
        assert r_wide >= r_np - 1e-12

    def test_boundary_target_multiplies_the_radius(self):
        # the pinned central ball survives much larger shifts than the
        # single-law worst case; this gap is what grows with dimension
        spec_p = NoiseSpec("general-gaussian", 0.5, 2, 8)
        spec_q = NoiseSpec("general-gaussian", 0.4, 2, 8)
        qb = _boundary_target(spec_p, spec_q, 0.9, "ball")
        r_corner = dsrs_radius(DsrsProblem(spec_p, spec_q, 0.9, qb, qb, 1.0))
        assert r_corner > 2.0 * np_radius(spec_p, 0.9)
