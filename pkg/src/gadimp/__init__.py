"""Three-precision alternating-direction implicit solver toolkit."""

from .errors import (AllDiverged, DenseCapExceeded, DimensionMismatch,
                     EscalationExhausted, GadimpError, IllConditionedGram,
                     NonPositiveAlpha, NonSquare, RangeOverflow,
                     SingularMatrix, ZeroError, ZeroReference)
from .precision import (FORMATS, PrecisionFormat, comp_dot, fl_dot, fl_op,
                        fl_sum, quantize, resolve_format, two_prod, two_sum,
                        unit_roundoff)
from .sparsemat import (SparseMatrix, identity, kron, mm_read, mm_write,
                        residual, shift_diagonal, spmv, symm_skew_split,
                        transpose, tridiag)
from .problems import Problem, build_cd_3d, build_cdr_2d, build_complex_rd
from .splitting import Splitting, make_hss_splitting
from .inner import InnerSolveStats, cg_normal_skew, cg_spd
from .gadi import GadiConfig, SolveReport, gadi_solve, stagnation_check
from .analysis import (DenseIterationOperator, TheoryBounds, backward_error,
                       condition_estimate, dense_iteration_operator,
                       forward_error, lambda_sequence, matrix_norm_2, mu_k,
                       spectral_radius, theory_bounds)
from .alphaselect import (AlphaSelectConfig, GprModel, gpr_fit, gpr_predict,
                          grid_search_alpha, make_features, predict_alpha,
                          select_alpha)

__version__ = "0.1.0"
