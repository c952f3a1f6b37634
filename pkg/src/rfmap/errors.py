"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates an operation's documented preconditions."""


class DegenerateInputError(ValueError):
    """Too few, or collinear, sites to triangulate."""

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


class EmptyInputError(ValueError):
    """No usable records survived filtering."""


class GridMismatchError(ValueError):
    """Two power maps are not defined on the same mesh."""


class ScenarioDegenerateError(RuntimeError):
    """A scenario draw produced fewer than three sensors."""

    def __init__(self, message: str, n_sensors: int, seed: int):
        super().__init__(message)
        self.n_sensors = n_sensors
        self.seed = seed
