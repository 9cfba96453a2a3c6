"""Certified L2 robustness radii for randomized-smoothing classifiers.

The package certifies smoothed classifiers two ways: the single-constraint
worst case driven by the top-class probability pA alone, and the
double-sampling worst case that additionally constrains the top-class
probability qA under a second, concentric noise distribution.  Both reduce
to one-dimensional quadrature over exact radial and angular laws, so no
trained model is required: Monte Carlo count files, analytic synthetic
classifiers, and the command line all feed the same engine.
"""

from .confidence import ProbBounds, cp_lower, cp_upper, double_sampling_bounds
from .distributions import (
    NoiseSpec,
    angular_cdf,
    radial_cdf,
    radial_log_density,
    radial_quantile,
    sample_noise,
)
from .dsrs import (
    DsrsProblem,
    DualPoint,
    dsrs_radius,
    dsrs_worst_case,
    expectations,
    feasible_q_range,
    solve_duals,
)
from .errors import InfeasibleConstraints, NumericFailure
from .io import (
    RunConfig,
    emit_counts,
    emit_curve,
    emit_results,
    emit_table,
    parse_counts,
    parse_grid,
    parse_results,
)
from .neyman_pearson import CertQuery, np_radius, np_radius_gaussian, np_worst_case
from .pipeline import (
    CertResult,
    CountRecord,
    ablation_k,
    ablation_n,
    ablation_sigma_q,
    acr,
    certified_accuracy,
    certify_batch,
    certify_record,
    sqrt_d_curve,
)
from .synthetic import BallClassifier, LinearClassifier, exact_probs, mc_counts

__version__ = "0.1.0"

__all__ = [
    "NoiseSpec",
    "radial_log_density",
    "radial_cdf",
    "radial_quantile",
    "angular_cdf",
    "sample_noise",
    "ProbBounds",
    "cp_lower",
    "cp_upper",
    "double_sampling_bounds",
    "CertQuery",
    "np_radius_gaussian",
    "np_worst_case",
    "np_radius",
    "DsrsProblem",
    "DualPoint",
    "expectations",
    "solve_duals",
    "dsrs_worst_case",
    "dsrs_radius",
    "feasible_q_range",
    "CountRecord",
    "CertResult",
    "certify_record",
    "certify_batch",
    "certified_accuracy",
    "acr",
    "ablation_n",
    "ablation_k",
    "ablation_sigma_q",
    "sqrt_d_curve",
    "BallClassifier",
    "LinearClassifier",
    "exact_probs",
    "mc_counts",
    "NumericFailure",
    "InfeasibleConstraints",
    "RunConfig",
    "parse_counts",
    "emit_counts",
    "parse_results",
    "emit_results",
    "emit_curve",
    "emit_table",
    "parse_grid",
]
