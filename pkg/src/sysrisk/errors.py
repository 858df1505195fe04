"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class InfeasibleCandidateError(DomainError):
    """A candidate ideal-bank path violates positivity or solvency."""


class RiccatiBlowupError(ArithmeticError):
    """The Riccati final-value problem has no global solution on the window."""


class NonFiniteEnsembleError(ArithmeticError):
    """Some simulated paths overflowed and were flagged invalid."""


class ScenarioError(ValueError):
    """A scenario file is malformed or describes an inadmissible model."""
