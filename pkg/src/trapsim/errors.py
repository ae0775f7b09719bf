"""Exception types raised by the simulator."""

from __future__ import annotations


class TrapSimError(Exception):
    """Base class for all simulator errors."""


class HermiticityError(TrapSimError, ValueError):
    pass


class TruncationError(TrapSimError):
    """Population leaked into the top of the truncated Fock space.

    ``time`` is the simulation time (s) at which the guard tripped, if known;
    ``required_dim`` is a suggested Fock dimension, if one can be estimated.
    """

    def __init__(self, message, *, time=None, population=None, required_dim=None):
        super().__init__(message)
        self.time = time
        self.population = population
        self.required_dim = required_dim


class StepSizeError(TrapSimError, ValueError):
    pass


class ResonanceError(TrapSimError, ValueError):
    """A formula was evaluated at a pole (for example omega_g == omega_r)."""


class ConstraintError(TrapSimError, ValueError):
    """A physical constraint is violated (for example 2*Omega_mu >= omega_r - omega_g)."""


class FitError(TrapSimError):
    pass


class ConfigError(TrapSimError, ValueError):
    """Invalid run configuration. ``path`` locates the offending key."""

    def __init__(self, message, *, path=None, line=None, column=None):
        loc = []
        if path:
            loc.append(f"at '{path}'")
        if line is not None:
            loc.append(f"line {line}, column {column}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.path = path
        self.line = line
        self.column = column
