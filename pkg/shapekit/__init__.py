"""Derivative-weighted mean-variance estimation in a Gaussian RKHS and shape-constraint testing"""

from typing import List

from .assembly import Dataset, build_grid, build_gram
from .config import RunConfig, load_config
from .errors import DegenerateInferenceError, InputError, NotPsdError, ShapekitError, SolverError
from .estimator import FitResult, evaluate, fit, lambda_path
from .inference import NullDistribution, TestReport, omega_hat, run_test, wald_statistic
from .kernel import KernelModel
from .multiindex import ActiveSet, MultiIndexSet
from .simulation import SimulationConfig, run_experiment

__version__ = "0.1.0"


def __dir__() -> List[str]:
    return sorted(__all__)


__all__ = [
    "ActiveSet",
    "Dataset",
    "DegenerateInferenceError",
    "FitResult",
    "InputError",
    "KernelModel",
    "MultiIndexSet",
    "NotPsdError",
    "NullDistribution",
    "RunConfig",
    "ShapekitError",
    "SimulationConfig",
    "SolverError",
    "TestReport",
    "build_grid",
    "build_gram",
    "evaluate",
    "fit",
    "lambda_path",
    "load_config",
    "omega_hat",
    "run_experiment",
    "run_test",
    "wald_statistic",
]
