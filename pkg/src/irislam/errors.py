"""Exception hierarchy shared across the pipeline."""


class IrisLamError(Exception):
    """Base class for all package errors."""


class FormatError(IrisLamError):
    """Malformed image or model file."""


class DatasetError(IrisLamError):
    """Dataset layout problems (missing classes, empty splits)."""


class LocalizationError(IrisLamError):
    """Boundary search failed or produced implausible geometry."""


class ConfigError(IrisLamError):
    """Inconsistent or out-of-range configuration."""
