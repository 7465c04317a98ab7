"""Exception hierarchy for infeasible or ill-posed reconstruction problems."""


class ReconstructionError(Exception):
    """Base class. ``details`` carries machine-readable diagnostics."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class NonDiagonalizable(ReconstructionError):
    pass


class ConditionViolation(ReconstructionError):
    """An active eigenvalue coincides with an inactive one."""


class KernelDimension(ReconstructionError):
    pass


class RankDeficient(ReconstructionError):
    pass


class NodeCannotExpress(ReconstructionError):
    """The seeding node has a zero spectral component on an active frequency."""


class DegenerateSpectrum(ReconstructionError):
    pass


class Infeasible(ReconstructionError):
    pass


class BudgetTooSmall(ReconstructionError):
    pass
