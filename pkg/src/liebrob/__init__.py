"""Random-Hamiltonian operator growth: simulation, path sums, tail bounds
and matrix martingale checks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, InvalidInputError, InvalidSpecError, PreconditionError, RegimeError,
    ResourceError, UnsupportedError,
)
from .paths import BACKEND as PATH_BACKEND  # noqa: E402
