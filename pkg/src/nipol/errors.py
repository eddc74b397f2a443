"""Exception types raised by the analyses and the file front-end."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    """1-based position of a token or line in a ``.nipol`` file."""

    line: int
    col_start: int
    col_end: int

    def __post_init__(self):
        if self.line < 1 or self.col_start < 1 or self.col_end < self.col_start:
            raise ValueError(f"bad span {self.line}:{self.col_start}-{self.col_end}")

    def __str__(self):
        return f"{self.line}:{self.col_start}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan | None = None

    def __str__(self):
        if self.span is None:
            return self.message
        return f"{self.span}: {self.message}"


class NipolError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(NipolError):
    """The system description is malformed; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors[:5]))


class NonUniformPolicy(NipolError):
    def __init__(self, message, witness=None, initial_state_verdict=None):
        super().__init__(message)
        self.witness = witness
        self.initial_state_verdict = initial_state_verdict


class NotGlobalPolicy(NipolError):
    pass


class SubsetGuardExceeded(NipolError):
    def __init__(self, n_agents, guard):
        super().__init__(
            f"{n_agents} agents exceed the subset guard of {guard} "
            f"(up to 2^{n_agents} relations); lift it with force (--force on the command line)"
        )
        self.n_agents = n_agents
        self.guard = guard


class BudgetExceeded(NipolError):
    def __init__(self, requested, largest_bound, cost, budget):
        super().__init__(
            f"bound {requested} needs {cost} sequence evaluations, budget is {budget}; "
            f"largest feasible bound is {largest_bound}"
        )
        self.requested = requested
        self.largest_bound = largest_bound
        self.cost = cost
        self.budget = budget


class NotAReductionInstance(NipolError):
    pass


class TooLarge(NipolError):
    pass
