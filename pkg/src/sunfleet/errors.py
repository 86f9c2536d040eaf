"""Exception taxonomy for the sunfleet package.

Load-time errors name the offending file/line/field, build-time errors name the
offending request or station, and validation errors carry the full violation
list so callers can report everything at once.
"""

from __future__ import annotations


class SunfleetError(Exception):
    """Base class for all package errors."""


class InputError(SunfleetError):
    """Malformed or inconsistent input data (networks, requests, prices, config)."""


class BuildError(SunfleetError):
    """Instance or model construction failed (e.g. unreachable request endpoints)."""


class SolveError(SunfleetError):
    """The solver could not produce a usable result."""


class ValidationError(SunfleetError):
    """A solution failed feasibility replay; carries the violation list."""

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class SolutionImportError(SunfleetError):
    """A solution file could not be parsed against the model it claims to solve."""
