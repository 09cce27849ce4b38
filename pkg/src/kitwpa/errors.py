"""Exception hierarchy; the CLI maps these onto exit-code categories."""


class KitwpaError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KitwpaError):
    """Configuration file missing, malformed, or schema-invalid (exit 2)."""


class NumericError(KitwpaError):
    """Simulation rejected or failed to converge (exit 3)."""
