"""Semi-parametric Bayesian GLS with Dirichlet-process priors on error hyper-parameters."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
