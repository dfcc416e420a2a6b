"""Relative-entropy regularized empirical risk minimization on finite model spaces."""

from .errors import (ConvergenceError, DomainError, ErmrerError, IndeterminateError,
                     InfeasibleError, InvalidArgumentError)
from .generalization import (DatasetPrior, GeneralizationReport, barycenter,
                             generalization_error, sensitivity, sensitivity_bound,
                             sensitivity_identity_check)
from .gibbs import (GibbsPosterior, agadir_check, compose, constrained_solution, jeffrey_gap,
                    objective_value, rn_derivative, sample, solve_ermrer, solve_type2)
from .measure_space import (AtomDistribution, CountableMeasure, ModelSpace, ReferenceMeasure,
                            counting_log_risk_family, counting_measure,
                            generalized_relative_entropy, is_absolutely_continuous, mix,
                            probability_measure, quadrature_lebesgue)
from .optimality import (OptimalityReport, analyze, concentration_profile,
                         expected_sublevel_set, level_set, solve_delta_epsilon)
from .partition import (CumulantReport, FeasibleSet, cgf, cumulants, feasible_set,
                        log_partition, subgaussian_beta, subgaussian_beta_report)
from .risk_model import (Dataset, EmpiricalRisk, LossSpec, empirical_risk,
                         expected_empirical_risk, is_separable)

__version__ = "0.1.0"
