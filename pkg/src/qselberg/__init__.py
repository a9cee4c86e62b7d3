"""Interpolation polynomials, Gauss-factored coefficient matrices and truncated lattice sums
for Jackson integrals with a Selberg-type weight, plus a residual-based verification kernel."""

from .errors import *  # noqa: F401,F403
from .qcore import (Params, check_generic, qbinom, qpoch, random_params, sample_generic,  # noqa: F401
                    working_precision)

__version__ = "0.1.0"
