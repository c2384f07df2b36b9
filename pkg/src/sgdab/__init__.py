"""Backtracking stochastic gradient descent ascent for nonconvex minimax problems."""
from .baselines import BaselineConfig, TiAdaState, run_agda, run_gda, run_tiada
from .core import (
    BlockVector,
    BudgetExceededError,
    DimensionError,
    DivergenceError,
    GradientMapEval,
    MinimaxProblem,
    PreconditionError,
    RngStream,
    SgdabError,
)
from .inner import InnerParams, InnerResult, rb_sagda, rb_sgda
from .metrics import MetricRow, MetricTrace
from .oracle import OracleHandle, OracleSpec, deterministic_gradient_map, stochastic_gradient_map
from .outer import (
    Budget,
    RunResult,
    SgdabConfig,
    init_y0,
    m4_certificate,
    rho_of,
    sgdab,
    sgdab_budgeted,
    wcmc_solve,
)
from .problems import make_bilinear, make_bilinear_wcmc, make_dro, load_libsvm
from .prox import prox_eval, project_simplex

__version__ = "0.1.0"
