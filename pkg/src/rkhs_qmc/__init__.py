"""Weighted tensor-product reproducing kernel Hilbert spaces and QMC integration.

Modules
-------
univariate_spaces
    Sobolev-type spaces on [0, 1] in four norm flavors and their kernels.
weights
    Coordinate weight sequences.
tensor_spaces
    Product kernels, Gram systems and product integrands.
embeddings
    Norms of identity maps between flavors.
qmc_rules
    Polynomial lattice rules, CBC construction, scrambling and error measures.
idim_integration
    Cost models and algorithms for infinitely many variables.
cli_experiments
    Command line experiments.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DiscretizationError,
    DomainError,
    HypothesisError,
    PlanError,
    RkhsQmcError,
    UnsupportedSpaceError,
)

__all__ = [
    "__version__",
    "RkhsQmcError",
    "UnsupportedSpaceError",
    "DomainError",
    "DiscretizationError",
    "PlanError",
    "HypothesisError",
]
