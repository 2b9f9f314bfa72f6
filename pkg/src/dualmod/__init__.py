"""Dual-real algebra with split vectors, module maps, differentiation,
projective charts, and symplectic canonical bases."""

from dualmod.core import (
    DEFAULT_TOL,
    EPS,
    ONE,
    ZERO,
    DualNumber,
    DualVector,
    NotInvertible,
    ShapeMismatch,
    basis_vector,
    default_tol,
    in_im_sharp,
    in_ker_sharp,
    inner,
    inv,
    is_invertible,
    is_zero_divisor,
    mul,
    scalar_mul,
    scalar_norm,
    set_default_tol,
    sharp_action,
    standard_basis,
    vector,
    vector_norm,
    zero_vector,
)
from dualmod.diff import (
    CR_DEFAULT_TOL,
    FD_DEFAULT_STEP,
    CrReport,
    DualFunc,
    EvaluationFailed,
    Expr,
    NonSmoothExpression,
    compose_funcs,
    const,
    coord,
    cr_check,
    eval_expr,
    eval_func,
    forward_derivative,
    func_from_module_map,
    head_coord,
    identity_func,
    inv_expr,
    limit_check,
    numeric_jacobian,
    re_part,
    sharp_expr,
    tail_coord,
    ze_part,
)
from dualmod.linalg import (
    ModuleMap,
    NoSolution,
    NotInKer,
    SplitBasis,
    apply,
    basis_map,
    compose,
    extract_basis,
    inverse_map,
    is_independent,
    is_isomorphism,
    map_from_realified,
    realify,
    realify_map,
    solve,
    unrealify,
)
from dualmod.manifold import (
    AtlasCheck,
    AtlasReport,
    ExprAtlas,
    ExprChart,
    InvalidRepresentative,
    NotInChart,
    ProjectiveAtlas,
    ProjectivePoint,
    TransitionMap,
    atlas_from_json,
    canonical_rep,
    chart_inverse,
    chart_map,
    equivalent,
    in_chart,
    in_transition_domain,
    is_valid_rep,
    random_rep,
    transition,
    verify_atlas,
)
from dualmod.selftest import CheckResult, SelftestReport, run_selftest
from dualmod.symplectic import (
    DarbouxBasis,
    DarbouxReport,
    EmptyShape,
    FormInvalid,
    GramForm,
    NumericalBreakdown,
    check_form,
    darboux_basis,
    eval_form,
    random_form,
    standard_form,
    verify_darboux,
)

__version__ = "0.1.0"
