"""Exception types shared across the package.

Each class maps to one failure category so callers (and the CLI exit-code
logic) can tell apart bad inputs, failed numerical verification, broken
control-procedure assumptions, and structurally unusable matrices.
"""


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition."""


class VerificationError(AssertionError):
    """A numerical check that the caller asked for did not hold."""


class ControlError(RuntimeError):
    """A control procedure violated one of its own internal guarantees.

    Raised only on logic errors (e.g. a forced interaction whose target
    agent unexpectedly refuses to move, or a schedule running past ten
    times its precomputed length cap). Should never fire on valid inputs.
    """


class NotErgodicError(RuntimeError):
    """A matrix handed to a stationary-distribution routine is reducible
    or periodic."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed.

    Carries ``field`` so the CLI can point at the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
