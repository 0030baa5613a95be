"""Exception hierarchy shared by every module."""


class ContractError(ValueError):
    """An input violated a documented precondition (shapes, ranges)."""


class FactorizationError(ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite: pivot {pivot} = {value!r}")
        self.pivot = pivot
        self.value = value


class DivergedError(ArithmeticError):
    """Training produced a non-finite objective."""

    def __init__(self, epoch: int, learner: str):
        super().__init__(f"{learner} diverged at epoch {epoch}: objective is not finite "
                         "(try a smaller step0)")
        self.epoch = epoch
        self.learner = learner


class DataFormatError(ValueError):
    """An on-disk file does not match its declared layout."""
