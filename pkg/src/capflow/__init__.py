"""Fractional mean curvature flow of star-shaped capillary surfaces."""

from .geometry import (
    RadialField,
    SphereGrid,
    build_grid,
    conormal_derivative,
    double_grid,
    gradient_values,
    quad_integrate,
    reflect_field,
    tangential_gradient,
)
from .nonlocal_ops import (
    HomotopyRule,
    InjectivityError,
    KernelParams,
    divergence_oracle_Hs,
    first_moment_psi,
    frac_laplacian,
    frac_laplacian_matrix,
    homotopy_derivative,
    hs_reference,
    injectivity_ratio,
    kernel_K,
    kernel_K_dxi,
    parametrized_Hs,
    remainder_R1,
    remainder_R2,
    riemann_zeta,
)
from .diagnostics import (
    HolderEstimate,
    divergence_identity_residual,
    holder_norm,
    interpolation_check,
    lemma521_bound,
    volume,
)
from .flow import (
    ExtinctionError,
    FlowConfig,
    FlowState,
    NonconvergenceError,
    Trajectory,
    apply_bc,
    assemble_rhs,
    bc_residual,
    initial_field,
    jacobian_J,
    normal_velocity,
    operator_matrix,
    prefactor_A,
    remainder_P,
    run_flow,
    step,
    surface_samples,
    unit_normal,
)
from .snapshots import (
    CorruptRecordError,
    SchemaMismatchError,
    SnapshotError,
    load_snapshot,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from .validation import CheckResult, run_suite

__version__ = "0.1.0"

__all__ = [
    "RadialField",
    "SphereGrid",
    "build_grid",
    "conormal_derivative",
    "double_grid",
    "gradient_values",
    "quad_integrate",
    "reflect_field",
    "tangential_gradient",
    "HomotopyRule",
    "InjectivityError",
    "KernelParams",
    "divergence_oracle_Hs",
    "first_moment_psi",
    "frac_laplacian",
    "frac_laplacian_matrix",
    "homotopy_derivative",
    "hs_reference",
    "injectivity_ratio",
    "kernel_K",
    "kernel_K_dxi",
    "parametrized_Hs",
    "remainder_R1",
    "remainder_R2",
    "riemann_zeta",
    "HolderEstimate",
    "divergence_identity_residual",
    "holder_norm",
    "interpolation_check",
    "lemma521_bound",
    "volume",
    "ExtinctionError",
    "FlowConfig",
    "FlowState",
    "NonconvergenceError",
    "Trajectory",
    "apply_bc",
    "assemble_rhs",
    "bc_residual",
    "initial_field",
    "jacobian_J",
    "normal_velocity",
    "operator_matrix",
    "prefactor_A",
    "remainder_P",
    "run_flow",
    "step",
    "surface_samples",
    "unit_normal",
    "CorruptRecordError",
    "SchemaMismatchError",
    "SnapshotError",
    "load_snapshot",
    "read_snapshot",
    "write_csv",
    "write_snapshot",
    "CheckResult",
    "run_suite",
]
