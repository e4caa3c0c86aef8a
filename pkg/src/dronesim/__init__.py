"""Robust Nash equilibrium seeking: games, robust utilities and dynamics."""

from .ambiguity import (AmbiguitySpec, DiscreteDistribution, SampleSet, discrete_wasserstein,
                        empirical_center, eta_bound, inflate_radius, wasserstein_radius)
from .config import ExperimentConfig, load_config, parse_config
from .consensus import ConsensusGains, ConsensusState, Digraph, consensus_substep, tracking_error
from .disbrag import (DistributedIsbrag, build_local_problem, centralized_reference_solve,
                      distributed_solve, run_algorithm1, run_disbrag)
from .dro import DroOracle, NominalOracle, dro_supergradient, dro_value, min_norm_supergradient
from .errors import (ConfigurationError, ConvergenceError, DimensionError, DivergenceError,
                     DronesimError, EvaluationError, NonDifferentiableError, ParameterError,
                     SampleOutsideBoxError, StageError, UnsupportedFamilyError)
from .experiment import RunResult, replicate, run_experiment, sweep
from .game import (Box, Game, IntervalSet, Profile, PureProduct, Quadratic, UserUtility,
                   WeightedAbsProduct, eta_ne_residual)
from .isbrag import AlgoParams, bound_constants, lyapunov_value, run_isbrag, validate_params

__version__ = "0.1.0"

__all__ = [
    "AlgoParams", "AmbiguitySpec", "Box", "ConfigurationError", "ConsensusGains", "ConsensusState",
    "ConvergenceError", "Digraph", "DimensionError", "DiscreteDistribution", "DistributedIsbrag",
    "DivergenceError", "DroOracle", "DronesimError", "EvaluationError", "ExperimentConfig", "Game", "IntervalSet",
    "NominalOracle", "NonDifferentiableError", "ParameterError", "Profile", "PureProduct", "Quadratic",
    "RunResult", "SampleOutsideBoxError", "SampleSet", "StageError", "UnsupportedFamilyError", "UserUtility",
    "WeightedAbsProduct", "bound_constants", "build_local_problem", "centralized_reference_solve",
    "consensus_substep", "discrete_wasserstein", "distributed_solve", "dro_supergradient", "dro_value",
    "empirical_center", "eta_bound", "eta_ne_residual", "inflate_radius", "load_config", "lyapunov_value",
    "min_norm_supergradient", "parse_config", "replicate", "run_algorithm1", "run_disbrag",
    "run_experiment", "run_isbrag", "sweep", "tracking_error",
    "validate_params", "wasserstein_radius",
]
