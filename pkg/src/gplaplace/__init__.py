"""Laplace-approximation model selection for Gaussian processes.

The stabilised Laplace criteria (``LapS``, ``LapAIC``, ``LapBIC``) are computed
by :func:`criteria_suite` together with MLL, MAP, AIC and BIC.  Reference
evidences come from :mod:`gplaplace.oracle`, kernel search from
:mod:`gplaplace.search`.
"""

__version__ = "0.1.0"

from .data import (
    GeneratorSpec, linear_benchmark_dataset, load_csv, normalize, sample_from_gp_prior,
    write_csv,
)
from .errors import ConfigError, NumericalError
from .fit import FitResult, optimize
from .kernels import HyperParams, eval_kernel, mauna_kernel, parse_kernel, render
from .laplace import (
    EvaluationResult, HessianSpectrum, clamp_eigenvalues, confidence_ellipse, criteria_suite,
    hessian_at, log_evidence_laplace,
)
from .model import Dataset, GPModel, PriorSpec, build_prior, log_map, log_mll
from .oracle import EvidenceEstimate, nested_sampling_evidence, quadrature_evidence
from .search import SearchTrace, cks_search, recognition_check

__all__ = [
    "ConfigError", "Dataset", "EvaluationResult", "EvidenceEstimate", "FitResult",
    "GPModel", "GeneratorSpec", "HessianSpectrum", "HyperParams", "NumericalError",
    "PriorSpec", "SearchTrace", "build_prior", "clamp_eigenvalues", "cks_search",
    "confidence_ellipse", "criteria_suite", "eval_kernel", "hessian_at",
    "linear_benchmark_dataset", "load_csv", "log_evidence_laplace", "log_map", "log_mll",
    "mauna_kernel", "nested_sampling_evidence", "normalize", "optimize", "parse_kernel",
    "quadrature_evidence", "recognition_check", "render", "sample_from_gp_prior", "write_csv",
]
