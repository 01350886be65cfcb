"""Cubic-regularized Newton methods with delayed and inexact curvature."""

from .analysis import (
    TheoryParams,
    TheoryReport,
    charged_time,
    check_lemma_cubicfunc,
    check_lemma_grad_and_eig,
    check_lemma_sum_bound,
    check_one_step,
    check_theorem1_prefixes,
    mu_rho,
    optimal_rho,
    stationarity_certificate,
    theorem1_bound,
    wallclock_models,
)
from .cubic import CubicModel, CubicSolution, bracket_sigma, model_value, phi, solve_cubic
from .curvature import (
    CurvatureUpdate,
    DelaySchedule,
    InitStrategy,
    LazyProvider,
    LbfgsMemory,
    SimulatedProvider,
    ThreadedProvider,
    init_h0,
    lbfgs_materialize,
)
from .errors import (
    DimensionMismatch,
    FormatError,
    InvalidParams,
    MaxIterExceeded,
    NonFinite,
    ParseError,
    SingularShift,
    WorkerPanicked,
)
from .linalg import SpectralFactorization, SymMatrix, min_eig_estimate, shifted_solve, sym_eig
from .matrix_io import read_matrix, write_matrix
from .optimizer import (
    ProviderSpec,
    RunConfig,
    RunTrace,
    adaptive_rho_step,
    run_lazy,
    run_split_client,
    run_vanilla,
)
from .problems import (
    Dataset,
    LogisticOracle,
    ObjectiveOracle,
    bundled_a1a_sample,
    gen_synthetic,
    load_libsvm,
    make_logistic_oracle,
    make_test_oracle,
    parse_libsvm,
    write_libsvm,
)

__version__ = "0.1.0"
