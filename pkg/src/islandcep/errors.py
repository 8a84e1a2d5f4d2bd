"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` (for example
``"rate_unachievable"`` or ``"no_scenarios"``) so callers and the CLI can
branch on it without parsing messages.
"""

from __future__ import annotations


class CepError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ValidationError(CepError):
    """Input data violates a documented invariant.

    ``violations`` holds the individual findings when more than one rule
    failed at once.
    """

    def __init__(self, code: str, message: str | None = None, violations=None):
        super().__init__(code, message)
        self.violations = list(violations or [])


class ScenarioError(CepError):
    """A scenario could not be constructed from the given series."""


class ModelBuildError(CepError):
    """The optimization model could not be assembled."""


class SolverError(CepError):
    """A backend solve failed or returned an unusable status."""

    def __init__(self, code: str, message: str | None = None, result=None):
        super().__init__(code, message)
        self.result = result
