"""Exception types shared across the package."""


class TransOnlineError(Exception):
    pass


class DepthOverflow(TransOnlineError):
    pass


class BudgetExceeded(TransOnlineError):
    pass


class RealizabilityViolation(TransOnlineError):
    def __init__(self, round_index: int, message: str = ""):
        self.round_index = round_index
        super().__init__(message or f"label at round {round_index} is not realizable by the class")


class SequenceLengthMismatch(TransOnlineError):
    pass


class ExpertCapExceeded(TransOnlineError):
    pass


class ProbeNondeterminism(TransOnlineError):
    pass
