"""Variable-kernel Bregman proximal gradient solver and error-bound diagnostics."""

from .bregman import (BregmanKernel, BregmanStep, bregman_distance,
                      check_lemma21, check_prop21, check_prop22, check_prop24,
                      diagonal_kernel, euclidean_kernel, general_kernel,
                      solve_subproblem, spd_kernel)
from .corpus import (CorpusEntry, RawFunction, ex53_prox_reference,
                     list_corpus_ids, load_corpus, staircase_subdiff_dist)
from .diagnostics import (EBCertificate, GridOracle, ProjectionOracle, Region,
                          SolutionSetOracle, certify_bp_gap,
                          certify_bregman_prox_eb, certify_kl,
                          certify_level_set_bregman_eb,
                          certify_level_set_subdiff_eb, certify_prox_pl,
                          certify_weak_metric_subreg, check_assumption_h,
                          check_prop53, check_prop61_prediction,
                          check_sufficient_conditions, estimate_exponent,
                          measure_levelset_contraction, sample_region,
                          scan_counterexample, sublevel_distance)
from .errors import (CapabilityError, ConfigError, DomainError,
                     InnerSolverError, InsufficientSamplesError,
                     NonDescentError, NumericError, RegimeError,
                     TargetValueError, VbpgError)
from .problem import (AnalyticOracles, CompositeProblem, NonsmoothTerm,
                      SmoothTerm, box_indicator_term, derive_constants,
                      l1_term, least_squares_smooth, mcp_term, objective,
                      quadratic_smooth, validate_problem, zero_smooth,
                      zero_term)
from .solver import (BlockJacobiSchedule, ConstantSchedule, CustomSchedule,
                     DiagonalBBSchedule, SolverTrace, VbpgConfig, check_vp_eb,
                     measure_rates, run_regularized_jacobi, run_vbpg)

__version__ = "1.0.0"
