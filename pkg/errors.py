"""
Exception hierarchy for the laboratory.

Services raise these; the CLI maps CritwinError to exit code 1 and usage
problems to exit code 2.
"""

from typing import Any, Optional


class CritwinError(Exception):
    """Base class for all computation failures."""
    pass


class DomainError(CritwinError, ValueError):
    """Raised when an argument lies outside a function's mathematical domain."""
    pass


class PreconditionError(CritwinError, ValueError):
    """Raised when an operation's documented precondition is violated."""
    pass


class PrecisionError(CritwinError):
    """Raised when extended-precision work detects loss of significance."""
    pass


class QuadratureError(CritwinError):
    """Raised when adaptive quadrature does not reach its tolerance."""

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"


class SimulationBudgetError(CritwinError):
    """Raised when a G(n,p) draw would exceed the configured edge budget."""

    def __init__(self, n: int, p: float, expected_edges: float, budget: int):
        self.n = n
        self.p = p
        self.expected_edges = expected_edges
        self.budget = budget
        super().__init__(
            f"G(n={n}, p={p:.6g}) expects ~{expected_edges:.3g} edges, "
            f"over the budget of {budget} (raise CRITWIN_MAX_EDGES to allow)"
        )


class EnumerationLimitError(PreconditionError):
    """Raised when exhaustive enumeration is asked for too many vertices."""
    pass
