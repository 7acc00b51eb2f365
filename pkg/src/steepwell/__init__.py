"""Spectral Galerkin toolkit for biharmonic problems with a steep potential well."""

from importlib.metadata import PackageNotFoundError, version

from .errors import SteepWellError
from .model_config import Box, NonlinearitySpec, ProblemParams, WellPotential, box_problem, load_config

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "Box",
    "NonlinearitySpec",
    "ProblemParams",
    "SteepWellError",
    "WellPotential",
    "box_problem",
    "load_config",
]
