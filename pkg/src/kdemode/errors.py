"""Exception hierarchy shared by every module."""


class KdeModeError(Exception):
    """Base class for all library errors."""


class DomainError(KdeModeError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedOperation(KdeModeError):
    """The kernel does not provide what the operation needs (derivative, delta rule...)."""


class DegenerateKernelError(KdeModeError):
    """The kernel is locally constant on the window of interest."""


class DatasetError(KdeModeError, ValueError):
    """Malformed dataset input (ragged rows, non-finite values, bad shape)."""


class StallError(KdeModeError):
    """Every mean-shift weight vanished; the iterate cannot move."""


class SketchFailure(KdeModeError):
    def __init__(self, attempts, message=None):
        self.attempts = attempts
        super().__init__(message or f"no sketch passed verification after {attempts} attempts")


class InconsistentSketchError(KdeModeError):
    """The sketch was not built from the dataset it is being used with."""


class ExtensionFailure(KdeModeError):
    def __init__(self, worst_ratio, iterations):
        self.worst_ratio = worst_ratio
        self.iterations = iterations
        super().__init__(
            f"Lipschitz extension infeasible after {iterations} sweeps "
            f"(worst constraint ratio {worst_ratio:.6g})"
        )


class BudgetExceeded(KdeModeError):
    def __init__(self, count, cap, what="grid points"):
        self.count = count
        self.cap = cap
        super().__init__(f"{what}: {count} exceeds budget {cap}")
