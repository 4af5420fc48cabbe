"""Exception and warning types.

Every error raised by the package derives from :class:`FairvalError` and
carries an ``exit_code`` used by the command-line front end.
"""


class FairvalError(Exception):
    exit_code = 3


class ParameterError(FairvalError, ValueError):
    """A caller-supplied parameter is outside its allowed range."""

    exit_code = 2


class SchemaError(FairvalError):
    """The column-role schema does not match the input file."""


class ParseError(FairvalError):
    """A cell could not be parsed; the message names the offending row."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyInputError(FairvalError):
    pass


class ShapeError(FairvalError, ValueError):
    pass


class StratificationError(FairvalError):
    pass


class GroupSupportError(FairvalError):
    """A conditioning cell (label, group) has no members."""


class KindError(FairvalError, TypeError):
    pass


class SizeError(FairvalError):
    pass


class MetricUndefinedError(FairvalError):
    exit_code = 4


class DegenerateFitError(FairvalError):
    exit_code = 4


class FairvalWarning(UserWarning):
    pass
