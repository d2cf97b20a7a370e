"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside an operation's admissible domain."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


class BudgetError(ConfigError):
    """An enumeration would exceed the configured sequence budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"exhaustive enumeration needs {required} sequences, "
            f"exceeding the budget of {budget}"
        )


class NumericError(RuntimeError):
    """A computation produced non-finite values.

    ``stage`` identifies the first failing stage when known.
    """

    def __init__(self, message: str, stage: int | None = None):
        self.stage = stage
        if stage is not None:
            message = f"{message} (stage {stage})"
        super().__init__(message)
