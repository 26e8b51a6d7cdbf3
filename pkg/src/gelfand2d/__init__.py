"""Radial bifurcation diagrams for -Laplace(u) = lambda V_k(|x|) f(u) in the 2-D unit ball.

V_k(r) = 1/(r^2 (-log(r/e))^(2+k)) and f(u) = e^u or (1+u)^p.
"""

from .bifurcation import (BifurcationCurve, BifurcationType, beta_star, canonical_trajectory,
                          classify_type, lambda_alpha_of_beta, trace_curve)
from .errors import DomainError, GuardError, NumericalError
from .integrator import (RadialSolution, Trajectory, asymptotic_init, flux_identity_defect,
                         integrate_autonomous, lyapunov_value, picard_solve, transform_r_to_t,
                         transform_t_to_r)
from .intersections import (SturmPair, family_value, intersection_count, separation_check,
                            sturm_wronskian_defect, zero_before_e)
from .model import (ExponentTable, Exponential, Power, ProblemConfig, SingularSolutionInfo,
                    critical_exponents, exponent_table, hardy_coefficient,
                    linearization_eigenvalues, oscillation_predicate, singular_h1_membership,
                    singular_residual, singular_solution, weight_eval)
from .stability import (MorseIndex, StabilityReport, TestFunctionBand, destabilizing_band,
                        hardy_quadratic_form, morse_classification)

__version__ = "0.1.0"
