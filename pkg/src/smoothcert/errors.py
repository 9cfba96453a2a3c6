"""Exception types shared across the certification engine."""

from __future__ import annotations


class NumericFailure(RuntimeError):
    """An iterative numerical routine failed to converge.

    Carries a ``diagnostics`` dict (iteration counts, bracket endpoints,
    worst residuals) so failures can be reported with enough context to
    reproduce them.
    """

    def __init__(self, message: str, **diagnostics: object) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        detail = ", ".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({detail})"


class InfeasibleConstraints(ValueError):
    """The requested probability constraints admit no feasible function.

    Raised by the dual solver when bracket expansion is exhausted without
    matching the constraint targets; callers fall back to single-constraint
    certification and log the event.
    """

    def __init__(self, message: str, **diagnostics: object) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics
