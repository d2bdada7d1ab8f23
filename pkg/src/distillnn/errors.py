"""Exception hierarchy shared across the package."""


class ContractError(ValueError):
    """An argument or call violates a documented precondition."""


class DimensionError(ContractError):
    """Array shapes do not compose."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class TrainingDivergedError(NumericError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class ScheduleExhaustedError(RuntimeError):
    """Optimizer stepped past its configured total step count."""
