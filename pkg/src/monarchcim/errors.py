"""Shared exception types."""


class DimensionError(ValueError):
    """Input shape or divisibility requirement violated."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to converge within its iteration budget."""


class MappingError(ValueError):
    """Mapping configuration is unsupported or inconsistent."""


class CalibrationError(ValueError):
    """Cost-model calibration is missing or cannot be fitted."""


class ConfigError(ValueError):
    """Run configuration file is malformed or inconsistent."""
