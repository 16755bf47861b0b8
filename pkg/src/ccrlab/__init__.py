"""Numerical laboratory for perturbed shift semigroups on a uniform grid.

The package builds generalized flows from a generating function phi: the
renewal solve, the perturbation kernel, additive cocycles, Toeplitz
diagnostics, exact open-set measure arithmetic, and the type I / type III
classifiers, with a CLI front end that emits CSV/JSON reports and figures.
"""
from .grids import (
    Grid,
    GridFunction,
    GridMismatchError,
    LambdaGrid,
    convolve,
    cumint,
    inner,
    laplace,
    norm1,
    norm2,
    symbol_on_lambda,
)
from .kernels import (
    Kernel2D,
    PhiSpec,
    SemigroupOperator,
    ShiftPerturbation,
    SolverBlowup,
    build_kernel,
    idempotent_check,
    kernel_cocycle_residual,
    left_inverse_residual,
    materialize_phi,
    perturbed_matrix,
    shift_matrix,
    solve_renewal,
)
from .cocycles import (
    CocyclePair,
    c_interval,
    d_interval,
    imag_cocycle,
    interval_overlap,
    kernel_membership,
    pairing,
    real_cocycle,
)
from .toeplitz import (
    BOUNDED,
    DIVERGING,
    INCONCLUSIVE,
    ToeplitzMatrix,
    fn_plancherel,
    gn_vector,
    hs_closed_form,
    hs_divergence_probe,
    hs_norm,
    j_operator_check,
    lower_bound_probe,
    taum_gn_decay,
    toeplitz_apply,
    toeplitz_matrix,
    uncertainty_check,
)
from .opensets import (
    OpenSet,
    ProfileF,
    asymptotic_fit,
    construct_U,
    sandwich_check,
    symdiff_measure,
    tail_bound,
)
from .classify import (
    TYPE_I,
    TYPE_III,
    TYPE_UNDECIDED,
    ClassifierConfig,
    IsoReport,
    TypeReport,
    convergence_detector,
    global_type,
    iso_probe,
    local_type,
    sumsystem_hs_probe,
    sweep,
)

__version__ = "0.1.0"
