"""Exceptions in uavtwin"""


class TwinBaseException(Exception):
    """Base class for exceptions in this package"""


class ScenarioParseException(TwinBaseException):
    """The scenario file could not be read or is not valid YAML."""
    def __init__(self, path, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f'{path}: {reason}')


class ScenarioValidationException(TwinBaseException):
    """A scenario invariant is violated, `field` names the offending key."""
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f'{field}: {reason}')


class TrajectoryRangeException(TwinBaseException):
    """Requested time is outside of the trajectory."""
    def __init__(self, t: float, start: float, end: float):
        self.t = t
        self.start = start
        self.end = end
        super().__init__(f't={t} outside of [{start}, {end}]')


class DegenerateDirectionException(TwinBaseException):
    """Direction between two identical points is undefined."""
    def __init__(self, position):
        self.position = position
        super().__init__(position)


class InvalidParameterException(TwinBaseException):
    """A parameter is out of its allowed range."""
    def __init__(self, name: str, value):
        self.name = name
        self.value = value
        super().__init__(f'{name}={value!r}')


class LengthMismatchException(TwinBaseException):
    """Two sample sequences that need the same length don't have it."""
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f'expected {expected} samples, got {actual}')


class EmptySeriesException(TwinBaseException):
    """An input series has no samples."""
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)


class TimestampMismatchException(TwinBaseException):
    """Time series are not aligned or don't overlap."""
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)


class DegenerateGeometryException(TwinBaseException):
    """The Jacobian of a localization problem is rank deficient."""
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f'condition number {condition:.3g}')


class InsufficientMeasurementsException(TwinBaseException):
    """Not enough receivers or measurements to solve for a position."""
    def __init__(self, required: int, available: int):
        self.required = required
        self.available = available
        super().__init__(f'need {required}, got {available}')


class FrameIndexException(TwinBaseException):
    """Frame index is outside of the stream."""
    def __init__(self, index: int, n_frames: int):
        self.index = index
        self.n_frames = n_frames
        super().__init__(f'frame {index} of {n_frames}')


class RecordingFormatException(TwinBaseException):
    """IQ recording or its sidecar can't be read."""
    def __init__(self, path, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f'{path}: {reason}')


class CampaignNotFoundException(TwinBaseException):
    """The requested campaign run is not in the archive."""
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)


class NotACommandException(TwinBaseException):
    """Raised when something that is not a command is executed."""
