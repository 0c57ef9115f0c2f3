"""Exception hierarchy shared by every module of the simulator."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all errors raised by :mod:`timebinsim`."""


class DomainError(SimulationError, ValueError):
    """An argument lies outside the domain of an operation."""


class NormalizationError(DomainError):
    """An amplitude vector that must be normalized is not."""


class ValidationError(DomainError):
    """A parameter set violates a physical constraint (e.g. non-unitary noise)."""


class ResourceError(SimulationError):
    """A configured size limit would be exceeded."""


class UnboundSymbolError(DomainError):
    """A symbolic circuit parameter has no value bound at execution time."""

    def __init__(self, names):
        self.names = tuple(sorted(names))
        super().__init__("unbound symbol(s): " + ", ".join(self.names))


class LocatedError(DomainError):
    """An error tied to a 1-based ``line``/``column`` in netlist source text."""

    def __init__(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class NetlistSyntaxError(LocatedError):
    """Lexical or syntax error in netlist text.

    ``expected`` holds the set of token descriptions the parser would have
    accepted at the failure point (empty for lexical errors).
    """

    def __init__(self, message: str, line: int, column: int, expected=()):
        self.expected = tuple(sorted(set(expected)))
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, line, column)


class CircuitError(LocatedError):
    """A netlist parsed but does not describe a valid circuit."""
