"""PDE structure discovery: reference solvers, a neural surrogate with
Taylor-series derivatives, and a genetic search over equation genomes."""

from .errors import (
    ConfigurationError, DivergenceError, GapdeError, StageError, StructuralError, TrainingError,
)
from .experiment import ExperimentConfig, Report, preset, run_experiment, run_sweep
from .ga import GaConfig, evolve, fitness
from .genome import GenePool, Genome, canonicalize, parse_rendered, render
from .regression import FixedLibrary, least_squares, stridge, stridge_search
from .series import TruncatedSeries, derivatives_at
from .solvers import Field, ProblemSpec, add_noise, sample_training_data, solve_reference_problem
from .surrogate import MetaDataset, MetaGridSpec, SurrogateNet, TrainConfig, generate_meta_data, train

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DivergenceError",
    "GapdeError",
    "StageError",
    "StructuralError",
    "TrainingError",
    "ExperimentConfig",
    "Report",
    "preset",
    "run_experiment",
    "run_sweep",
    "GaConfig",
    "evolve",
    "fitness",
    "GenePool",
    "Genome",
    "canonicalize",
    "parse_rendered",
    "render",
    "FixedLibrary",
    "least_squares",
    "stridge",
    "stridge_search",
    "TruncatedSeries",
    "derivatives_at",
    "Field",
    "ProblemSpec",
    "add_noise",
    "sample_training_data",
    "solve_reference_problem",
    "MetaDataset",
    "MetaGridSpec",
    "SurrogateNet",
    "TrainConfig",
    "generate_meta_data",
    "train",
]
