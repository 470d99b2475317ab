"""Exception hierarchy shared by every module of the toolkit."""


class EncoderDIError(Exception):
    """Base class for all toolkit errors."""


class MalformedHeader(EncoderDIError):
    pass


class DimensionMismatch(EncoderDIError, ValueError):
    pass


class RowCountMismatch(EncoderDIError, ValueError):
    pass


class NonFiniteValue(EncoderDIError, ValueError):
    def __init__(self, row: int, col: int, value: float):
        super().__init__(f"non-finite value {value!r} at row {row}, column {col}")
        self.row = row
        self.col = col


class IoFailure(EncoderDIError, OSError):
    pass


class ZeroNormRow(EncoderDIError, ValueError):
    def __init__(self, row: int):
        super().__init__(f"row {row} has (near) zero l2 norm")
        self.row = row


class TooFewRows(EncoderDIError, ValueError):
    pass


class TooFewSamples(EncoderDIError, ValueError):
    pass


class InvalidDof(EncoderDIError, ValueError):
    pass


class BadFraction(EncoderDIError, ValueError):
    pass


class BadConfig(EncoderDIError, ValueError):
    pass


class BadSpec(EncoderDIError, ValueError):
    pass


class DegenerateComponent(EncoderDIError, ArithmeticError):
    pass


class DegenerateBounds(EncoderDIError, ArithmeticError):
    pass


class EmptyInput(EncoderDIError, ValueError):
    pass
