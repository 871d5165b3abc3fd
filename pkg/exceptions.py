"""
Custom exceptions for link-model evaluation failures.

Numerical kernels fail fast and loud on inputs outside their domain, while
sweep orchestration catches these per point so one bad grid value does not
abort a whole sweep.
"""

from typing import Any


class LinkModelError(Exception):
    """Base exception for all link-model errors."""

    def __init__(self, message: str, **kwargs):
        """
        Initialize link-model error with context.

        Args:
            message: Error description
            **kwargs: Additional metadata (e.g., argument, partial_sum, key)
        """
        self.metadata = kwargs
        super().__init__(message)

    def to_dict(self) -> dict[str, Any]:
        """Convert exception to dictionary for JSON or CSV serialization."""
        return {
            "error_type": self.__class__.__name__,
            "message": str(self),
            "metadata": self.metadata,
        }


class DomainError(LinkModelError):
    """Raised when a function is evaluated outside its mathematical domain."""

    def __init__(self, message: str, argument: float | None = None, **kwargs):
        super().__init__(message, **kwargs)
        self.argument = argument
        if argument is not None:
            self.metadata["argument"] = argument


class DistinctnessError(LinkModelError):
    """
    Raised when interference terms are not pairwise distinct.

    Partial-fraction expansions and the coefficient recursion divide by
    term differences, so near-equal terms are rejected unless the caller
    opted into jitter.
    """

    def __init__(
        self,
        message: str,
        terms: list[float] | None = None,
        index_pair: tuple[int, int] | None = None,
        **kwargs,
    ):
        super().__init__(message, **kwargs)
        self.terms = terms
        self.index_pair = index_pair
        if index_pair is not None:
            self.metadata["index_pair"] = index_pair


class DegeneracyError(LinkModelError):
    """Raised when the coefficient recursion hits alpha*v = 1 or equal alphas."""

    def __init__(self, message: str, kind: str = "", value: float | None = None, **kwargs):
        super().__init__(message, **kwargs)
        self.kind = kind
        self.value = value
        self.metadata["kind"] = kind
        if value is not None:
            self.metadata["value"] = value


class SeriesConvergenceError(LinkModelError):
    """
    Raised when an infinite series does not contract within its term cap.

    The partial sum is kept so callers can log or report the best estimate.
    """

    def __init__(self, message: str, partial_sum: float = float("nan"), terms: int = 0, **kwargs):
        super().__init__(message, **kwargs)
        self.partial_sum = partial_sum
        self.terms = terms
        self.metadata["partial_sum"] = partial_sum
        self.metadata["terms"] = terms


class QuadratureError(LinkModelError):
    """Raised when adaptive quadrature exceeds its subdivision budget."""

    def __init__(
        self,
        message: str,
        best_estimate: float = float("nan"),
        error_estimate: float = float("nan"),
        **kwargs,
    ):
        super().__init__(message, **kwargs)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate
        self.metadata["best_estimate"] = best_estimate
        self.metadata["error_estimate"] = error_estimate


class DegenerateOrderError(LinkModelError):
    """Raised when one decoding order has (numerically) zero probability."""

    pass


class ScenarioValidationError(LinkModelError):
    """
    Raised when a scenario file violates the schema or a physical constraint.

    The offending key path is recorded so the CLI can name it.
    """

    def __init__(self, message: str, key: str | None = None, constraint: str | None = None, **kwargs):
        super().__init__(message, **kwargs)
        self.key = key
        self.constraint = constraint
        if key is not None:
            self.metadata["key"] = key
        if constraint is not None:
            self.metadata["constraint"] = constraint


class OracleError(LinkModelError):
    """Raised when a brute-force reference evaluation is misused or fails its self-check."""

    pass
