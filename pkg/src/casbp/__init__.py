"""Optimal density steering for control-affine diffusions whose input and
noise channels do not match, via an alternating backward/forward solve of
the transformed factor PDE system with a trajectory buffer, plus a
Monte-Carlo verifier for the recovered feedback policy."""

from .densities import GaussianMixture, MixtureComponent, discretize_normalized, gaussian_mixture, sample, substream
from .driver import Solution, divide, reaction_diagnostic, run, run_with_continuation
from .errors import (BlowUpError, ConfigError, DegenerateFieldError, EvalError,
                     ExpressionError, UnknownIdentifierError, ValidationError)
from .exprs import Expr, parse
from .grids import (Grid2D, ScalarField, VectorField2, bilinear_sample, bilinear_sample_many,
                    divergence, gradient, integrate, laplacian_weighted)
from .hilbert import hilbert_distance
from .io import Config, load_config, read_snapshot, write_snapshot
from .kernels import TrajectoryBuffer, backward_solve, coupling_terms, forward_solve_with_memory
from .montecarlo import EnsembleResult, simulate, simulate_policy, tv_distance
from .problem import ProblemSpec, ValidationReport

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "Config", "ConfigError", "DegenerateFieldError", "EnsembleResult",
    "EvalError", "Expr", "ExpressionError", "GaussianMixture", "Grid2D", "MixtureComponent",
    "ProblemSpec", "ScalarField", "Solution", "TrajectoryBuffer", "UnknownIdentifierError",
    "ValidationError", "ValidationReport", "VectorField2",
    "backward_solve", "bilinear_sample", "bilinear_sample_many", "coupling_terms",
    "discretize_normalized", "divergence", "divide", "forward_solve_with_memory",
    "gaussian_mixture", "gradient", "hilbert_distance", "integrate", "laplacian_weighted",
    "load_config", "parse", "reaction_diagnostic", "read_snapshot", "run",
    "run_with_continuation", "sample", "simulate", "simulate_policy", "substream",
    "tv_distance", "write_snapshot",
]
