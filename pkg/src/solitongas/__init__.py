"""Random N-soliton ensembles of the focusing NLS equation and their soliton-gas limit."""

from .config import ExperimentConfig, default_config
from .contour import ContourGrid, build_contour, cauchy_minus, cauchy_offcontour, cauchy_plus
from .errors import (AccuracyError, ContractViolation, DegenerateDressingError, GeometryError,
                     SamplingError, SolitonGasError, SolvabilityError)
from .fluctuations import (bdelta_membership, clt_moments, clt_remainder, correlation_limit,
                           eval_G1, eval_G2, linear_statistic, wn_norms)
from .rhp import (JumpField, RHSolution, SpacetimePoint, averaged_solution, eval_M_off,
                  jump_averaged, jump_random, recover_field, recover_modsq, solve, solve_sie,
                  solve_sie_dx)
from .solitons import (amplitude_bound, free_solution, nsoliton_dressing, nsoliton_residue,
                       one_soliton)
from .spectral import (EigenvalueDomain, Interpolant, SpectralSample, draw_sample,
                       evolve_norming, norming_constants, sample_eigenvalues)

__version__ = "0.1.0"
