"""reluclass: linear-region geometry, capacity bounds, and excess-risk rates
for small ReLU classifiers in a teacher-student setup."""

from .bounds import (
    Architecture,
    BoundReport,
    active_piece_budget,
    covering_number_bound,
    g_class_entropy_bound,
    montufar_lower_bound,
    polyhedron_bracketing_bound,
    serra_upper_bound,
)
from .distribution import (
    Dataset,
    LowerBoundFamily,
    NoiseProfile,
    TeacherDistribution,
    a3_constants_analytic,
    d_pq,
    excess_risk,
    lower_bound_densities,
    noise_profile,
    normalize_teacher,
    sample,
    separable,
)
from .geometry import (
    Box,
    LinearRegion,
    Polytope,
    RegionDecomposition,
    bracket_cover_1d,
    count_active_pieces,
    decision_region,
    enumerate_regions,
    piece_vertices,
    symmetric_difference_volume,
    volume,
)
from .harness import (
    ExperimentConfig,
    RateResult,
    Row,
    fit_rate_slope,
    run_rate_experiment,
    verify_a3_report,
)
from .network import (
    NetworkClassSpec,
    NetworkParams,
    deserialize,
    evaluate,
    make_b_omega,
    make_bump_phi,
    make_psi_j,
    make_random_teacher,
    make_sawtooth,
    make_spike,
    serialize,
    size_metrics,
)
from .training import (
    TrainConfig,
    TrainedStudent,
    empirical_01_risk,
    hinge_erm,
    hinge_gradient,
    interval_dp_01_erm,
)

__version__ = "0.1.0"
