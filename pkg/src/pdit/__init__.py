"""Private dit (pdit) states: construction, block structure and verification."""

from .analysis import (
    CheckReport,
    ConstraintSet,
    ScanRow,
    appendix_a_conditions,
    distance_to_me_form,
    epsilon_scan,
    key_correlation_report,
    lemma2_q,
    ppt_spectral_report,
    sep_lower_bound,
    solve_equality_weight,
)
from .catalog import (
    appendix_xy,
    bound_entangled_key_state,
    flower_state,
    lemma2_family,
    swap_pbit,
    x_form_pbit,
    xy_form_pdit3,
)
from .linalg import (
    DEFAULT_TOL,
    Operator,
    eigvals_hermitian,
    kron,
    min_eigenvalue_pt,
    partial_transpose,
    trace_distance,
    trace_norm,
)
from .model import (
    BlockFamily,
    PditState,
    SystemShape,
    assemble_omega0,
    assemble_omega_pair,
    assemble_state,
    extract_blocks,
    extract_pt_blocks,
    is_positive_blockwise,
    is_ppt_blockwise,
)

__version__ = "0.1.0"
