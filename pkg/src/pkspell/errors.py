"""Exception types.

Everything derived from :class:`InputError` is a problem with user-supplied
data and maps to exit code 1 on the command line.
"""


class InputError(ValueError):
    pass


class OutOfRange(InputError):
    """A transposition would need triple accidentals or more than 7 sharps/flats."""


class MalformedFile(InputError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class SchemaError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConsistencyError(InputError):
    pass


class EmptyInput(InputError):
    pass


class InvalidK(InputError):
    pass


class LengthMismatch(InputError):
    pass


class NoValidTransposition(InputError):
    pass


class EmptyCorpus(InputError):
    pass


class EmptySequence(InputError):
    pass


class DimensionMismatch(InputError):
    pass
