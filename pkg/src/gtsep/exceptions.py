class ParameterError(ValueError):
    """Raised when a model or analysis parameter is outside its domain."""


class DimensionError(ValueError):
    """Raised when matrix, observation or instance shapes disagree."""
