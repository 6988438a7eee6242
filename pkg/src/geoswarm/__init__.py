"""Swarm formation on a potential manifold.

A swarm flies over the graph surface of a potential ``F(x1, x2)``.  Its
lattice is built from geodesics; the deformation of the lattice reveals the
sectional curvature, and online DMD drives the followers.
"""

from .analysis import (
    CurvatureEstimate,
    CurvatureEstimator,
    DeviationFields,
    DeviationSample,
    ErrorStats,
    curvature_table,
    deviation_fields,
    error_stats,
    estimate_kappa,
    propagate_jacobi,
    table_stats,
)
from .config import ScenarioConfig, load_config, parse_config
from .control import ControlResult, run_control
from .errors import (
    ConjugatePointFlag,
    DegenerateVelocity,
    DimensionMismatch,
    EmptyInput,
    GeoswarmError,
    IndexOutOfRange,
    InputError,
    NonFiniteState,
    NumericalBreakdown,
    NumericalError,
    ParseError,
    RankDeficient,
    TooFewAgents,
    ValidationError,
)
from .formation import FormationTopology, SwarmTrajectory, build_formation, rung_deviation, separations
from .geodesic import GeodesicPath, detect_conjugate, g_speed, integrate, orthonormal_launch, rk4_step
from .manifold import (
    CurvatureTensor,
    MetricData,
    PotentialField,
    christoffel,
    eval_potential,
    gaussian_curvature_oracle,
    metric_tensor,
    riemann_at,
    riemann_tensor,
    sectional_curvature,
)
from .odmd import (
    MeasurementFrame,
    OdmdModel,
    OnlineDMD,
    SnapshotPair,
    control_step,
    init_batch,
    predict,
    update,
)
from .runner import RunReport, run, run_sweep

__version__ = "0.1.0"
