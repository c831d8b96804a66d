"""Convex sets as sparse spectrahedral shadows.

Exact set operations, SDP-backed validations, conversions from classical
representations, order reduction, and estimation/reachability harnesses.
"""

from .backend import (
    ParallelotopeSolution,
    SolveReport,
    solve_feasibility_margin,
    solve_min_parallelotope,
    solve_support,
    solve_support_batch_dual,
)
from .convert import (
    Ellipsoid,
    Ellipsotope,
    HPolyhedron,
    Zonotope,
    constrained_zonotope,
    from_ellipsoid,
    from_ellipsotope,
    from_hpolyhedron,
    from_pnorm_ball,
    from_zonotope,
)
from .errors import (
    ContractViolation,
    DimensionMismatch,
    ShadowFormatError,
    SolverFailure,
    SpectraError,
)
from .ops import (
    HullResult,
    PolytopicMap,
    SqSetParams,
    build_sq_set,
    cartesian_product,
    conic_hull,
    convex_hull,
    intersect,
    linear_inverse_map,
    linear_map,
    lp_sum,
    minkowski_sum,
    polytopic_map,
    translate,
)
from .pencil import (
    BlockGroup,
    MergePlan,
    Shadow,
    SymSparse,
    assemble,
    deserialize,
    diag_concat,
    eval_membership_fast,
    load,
    save,
    serialize,
)
from .validate import BoundednessReport, contains_point, is_bounded, is_empty

__version__ = "0.1.0"

__all__ = [
    "BlockGroup",
    "BoundednessReport",
    "ContractViolation",
    "DimensionMismatch",
    "Ellipsoid",
    "Ellipsotope",
    "HPolyhedron",
    "HullResult",
    "MergePlan",
    "ParallelotopeSolution",
    "PolytopicMap",
    "Shadow",
    "ShadowFormatError",
    "SolveReport",
    "SolverFailure",
    "SpectraError",
    "SqSetParams",
    "SymSparse",
    "Zonotope",
    "assemble",
    "build_sq_set",
    "cartesian_product",
    "conic_hull",
    "constrained_zonotope",
    "contains_point",
    "convex_hull",
    "deserialize",
    "diag_concat",
    "eval_membership_fast",
    "from_ellipsoid",
    "from_ellipsotope",
    "from_hpolyhedron",
    "from_pnorm_ball",
    "from_zonotope",
    "intersect",
    "is_bounded",
    "is_empty",
    "linear_inverse_map",
    "linear_map",
    "load",
    "lp_sum",
    "minkowski_sum",
    "polytopic_map",
    "save",
    "serialize",
    "solve_feasibility_margin",
    "solve_min_parallelotope",
    "solve_support",
    "solve_support_batch_dual",
    "translate",
]
