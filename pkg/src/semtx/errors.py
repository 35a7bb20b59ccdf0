"""Exception types shared across the package; the CLI maps them to exit codes."""


class SemtxError(Exception):
    pass


class DomainError(SemtxError, ValueError):
    """An operation was invoked outside its stated domain."""


class RasterFormatError(SemtxError, ValueError):
    """Malformed PGM/PPM input; the message names the offending byte offset."""


class StreamHeaderError(SemtxError, ValueError):
    """Unparseable bitstream header. Payload corruption never raises this."""


class OracleError(SemtxError, RuntimeError):
    """External classifier transport or protocol failure."""


class ThresholdUnachievableError(SemtxError, RuntimeError):
    """No aggregation of regions reaches the probability threshold."""

    def __init__(self, message: str, best_probability: float):
        super().__init__(message)
        self.best_probability = best_probability


class ConfigError(SemtxError, ValueError):
    """Invalid CLI argument or sweep configuration."""
