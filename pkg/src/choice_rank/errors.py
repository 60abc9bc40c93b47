"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ChoiceRankError(Exception):
    """Base class for all package errors."""


class DomainError(ChoiceRankError, ValueError):
    """An argument lies outside the operation's domain."""


class ValidationError(ChoiceRankError, ValueError):
    """Input data violates a structural invariant."""


class ParseError(ValidationError):
    """A text file could not be parsed.

    Attributes:
        line: 1-based line number of the offending line, if known.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(ChoiceRankError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int, estimate=None) -> None:
        self.residual = residual
        self.iterations = iterations
        self.estimate = estimate
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")


class DisconnectedError(NumericalError):
    """The comparison graph of a dataset is not connected."""

    def __init__(self, components: list[list[int]]) -> None:
        self.components = components
        shown = ", ".join("{" + ",".join(map(str, c)) + "}" for c in components)
        super().__init__(f"comparison graph is disconnected; components: {shown}")


class ReducibleChainError(NumericalError):
    """A Markov chain has a state unreachable from the others."""

    def __init__(self, state: int) -> None:
        self.state = state
        super().__init__(f"Markov chain is reducible: item {state} is unreachable")


class IntransitiveError(ValidationError):
    """Pairwise majority preferences contain a cycle."""

    def __init__(self, triple: tuple[int, ...]) -> None:
        self.triple = triple
        super().__init__(
            "weak stochastic transitivity violated: majority cycle "
            + " > ".join(map(str, triple + triple[:1]))
        )
