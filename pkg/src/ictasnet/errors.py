class ShapeError(ValueError):
    """Operand shapes do not conform to an operation's contract."""


class InputTooShortError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class WavFormatError(ValueError):
    pass
