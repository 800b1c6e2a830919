class RearrangementError(ValueError):
    """Base class for domain errors raised by the core modules"""


class TieError(RearrangementError):
    """Two observations share a value"""


class InvalidPermutationError(RearrangementError):
    pass


class InvalidRankTupleError(RearrangementError):
    pass


class InvalidSpecError(RearrangementError):
    """A rearrangement spec fails its structural rules"""


class SingularFunctionError(RearrangementError):
    """A directing function has a constant piece"""


class NoClosedFormError(RearrangementError):
    """No closed-form rank law exists for this kind of rearrangement"""


class UnderpoweredError(RearrangementError):
    """Too few trials for the requested contingency table"""


class ConditioningError(RearrangementError):
    """Rejection sampling hit its attempt cap"""


class PartitionError(RearrangementError):
    """Cells overlap or fail to cover the space"""
