"""Closed-form H2/L2 performance of single- and double-integrator consensus
networks on directed graphs, with Lyapunov and time-domain reference oracles."""

from .closed_form import (
    Dynamics,
    Output,
    PerformanceQuery,
    PerformanceResult,
    h2_normal,
    performance,
    star_performance,
)
from .graph import (
    WeightedDigraph,
    build_laplacian,
    complete_laplacian,
    cyclic_laplacian,
    deviation_from_average_output,
    directed_path_laplacian,
    hermitian_part,
    imploding_star_laplacian,
)
from .inputs import Covariance, Deterministic, IdentityCovariance
from .spectral import SpectralData, decompose, geometric_weights, import_jordan
from .stability import GainSet

__version__ = "0.1.0"

__all__ = [
    "Covariance",
    "Deterministic",
    "Dynamics",
    "GainSet",
    "IdentityCovariance",
    "Output",
    "PerformanceQuery",
    "PerformanceResult",
    "SpectralData",
    "WeightedDigraph",
    "build_laplacian",
    "complete_laplacian",
    "cyclic_laplacian",
    "decompose",
    "deviation_from_average_output",
    "directed_path_laplacian",
    "geometric_weights",
    "h2_normal",
    "hermitian_part",
    "imploding_star_laplacian",
    "import_jordan",
    "performance",
    "star_performance",
]
