"""Energy-dependent Hamiltonians: self-consistent bound states, Feshbach
reduction, bi-orthogonal bases and energy-independent representatives."""

from .errors import ConfigError, EDHamError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "EDHamError", "NumericalError", "__version__"]
