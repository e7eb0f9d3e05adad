"""Partial smoothness as a constant-rank property, made executable.

The toolkit certifies partial smoothness of set-valued mappings by sampling
their graph representations and measuring projected tangent ranks, ships
structured convex functions with exact proximal maps and manifold pattern
calculus, runs a primal-dual splitting solver that detects the moment its
iterates identify the active manifolds, and checks second-order optimality
of smooth objectives on embedded manifolds.
"""

from .errors import (
    ChartError,
    DegenerateError,
    DivergenceError,
    EvaluationError,
    OffManifoldError,
    PreconditionError,
    PsmError,
    SchemaError,
)
from .geometry import (
    Chart,
    DualChart,
    SmoothMap,
    Subspace,
    chart_inverse_check,
    chart_parameter,
    fd_jacobian,
    normal_space,
    null_space_basis,
    numerical_rank,
    orthonormal_range,
    sample_ball,
    tangent_space,
    tangent_space_at,
)
from .graphs import (
    CONSTANT_RANK,
    DEGENERATE,
    RANK_VARIES,
    CoordGraphRep,
    DualGraphRep,
    PartialSmoothCertificate,
    RankProfile,
    coderivative_dim,
    constant_rank_probe,
    dual_rep_check,
    identifiability_test,
    normal_bundle_rep,
    projected_tangent_rank,
    regularity_check,
    smooth_selection,
    sum_rule_transform,
)
from .harness import RunReport, emit_rank_profile, emit_trace_csv, parse_trace_csv, run
from .manifold_opt import (
    ManifoldObjective,
    TangentMap,
    covariant_gradient,
    covariant_hessian,
    extended_subdiff_rep,
    graph_normal_space,
    project_to_manifold,
    quadratic_growth_margin,
    second_order_check,
    transversality_check,
)
from .proxfn import (
    L1,
    Box,
    GroupL1,
    LocalModel,
    ManifoldPattern,
    ProxFn,
    QuadraticShift,
    Separable,
    Zero,
    subdiff_graph_rep,
)
from .solver import (
    IterateRecord,
    SaddleProblem,
    Trace,
    identification_index,
    nondegeneracy_report,
    operator_norm,
    pd_step,
    saddle_residual,
    solve,
)

__version__ = "0.1.0"
