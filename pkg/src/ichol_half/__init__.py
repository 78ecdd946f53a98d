"""Half precision incomplete Cholesky preconditioners with breakdown
detection, global shifting and mixed precision iterative refinement."""
from .halffloat import (BF16, FORMATS, FP16, FP32, FP64, FormatParams,
                        RoundStatus, decode, encode, encode_array, get_format,
                        h_arith, safe_difference, safe_mulsub, safe_product,
                        safe_scale_check)
from .sparsecore import (HalfMatrix, MatrixError, SparseSpd, make_rhs,
                         read_matrix_market, scale_l2, squeeze,
                         write_matrix_market)
from .symbolic import FillPattern, level_pattern
from .factorize import (Attempt, Breakdown, BreakdownFlag, FactorStats,
                        FactorizationError, IcFactor, IcOptions, gmw_adjust,
                        ic_factorize, shifted_factorize)
from .krylov import (IrConfig, KrylovResult, Preconditioner, SolveReport,
                     backward_error, cg_solve, gmres_solve,
                     identity_preconditioner, ir_driver)
from .fixtures import FIXTURES, generate_fixture
from .experiment import (ExperimentConfig, ExperimentError, RunReport,
                         run_experiment)

__version__ = "0.1.0"
