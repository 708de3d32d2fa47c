"""Exception hierarchy.

Everything raised on purpose by this package derives from
:class:`ElevprivError`. Data problems (bad input files, impossible
requests) derive from :class:`DataError`; numerical failures during
training derive from :class:`NumericError`. The CLI maps the two families
to distinct exit codes.
"""


class ElevprivError(Exception):
    pass


class DataError(ElevprivError, ValueError):
    pass


class NumericError(ElevprivError, ArithmeticError):
    pass


class MissingCoordsError(DataError):
    pass


class GpxError(DataError):
    pass


class MalformedXmlError(GpxError):
    pass


class MissingElevationError(GpxError):
    def __init__(self, index):
        super().__init__(f"trackpoint {index} has no <ele> element")
        self.index = index


class EmptyTrackError(GpxError):
    pass


class DegenerateBoundaryError(DataError):
    pass


class ProviderUnavailableError(ElevprivError):
    pass


class OutOfCoverageError(DataError):
    def __init__(self, index, lat, lon):
        super().__init__(f"coordinate {index} ({lat}, {lon}) is outside provider coverage")
        self.index = index


class AlphabetTooSmallError(DataError):
    pass


class DegenerateLabelsError(DataError):
    pass


class WidthMismatchError(DataError):
    pass


class NonFiniteLossError(NumericError):
    pass


class ScheduleViolationError(DataError):
    pass


class TooShortError(DataError):
    pass


class InsufficientSamplesError(DataError):
    def __init__(self, label, count, needed):
        super().__init__(f"class {label!r} has {count} samples, needs at least {needed}")
        self.label = label


class UnattainableRatioError(DataError):
    pass
