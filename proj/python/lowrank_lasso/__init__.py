"""Python bindings for the lrl C++ library."""

from ._core import (
    FormatError,
    NumericalError,
    Problem,
    SensingOperator,
    ValidationError,
    block_decompose,
    bm_gradient,
    bm_hessian_vector,
    bm_objective,
    certify_criticality,
    compute_ehat,
    estimate_rip,
    generate_instance,
    ideal_solution,
    load_problem,
    numerical_rank,
    objective,
    polarization_check,
    save_problem,
    soft_hard_threshold,
    soft_threshold,
    solve_burer_monteiro,
    solve_ista,
    solve_ppgd,
    subgradient_membership,
    svd,
    theorem_rank_cap,
    verify_theorem1,
)

__all__ = [name for name in dir() if not name.startswith("_")]
