"""Exception types shared across the package.

``ValidationError`` covers bad inputs (malformed files, inconsistent
dimensions) and maps to CLI exit code 2. Anything else raised from the
library is a runtime failure (exit code 3).
"""


class RlparError(Exception):
    pass


class ValidationError(RlparError, ValueError):
    pass


class GroupConfigError(ValidationError):
    pass


class DegenerateGroupError(ValidationError):
    """A group whose labels are all positive has no defined imbalance coefficient."""


class DatasetError(ValidationError):
    pass


class CheckpointError(ValidationError):
    pass


class InsufficientSamplesError(RlparError):
    pass
