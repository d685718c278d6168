class InvalidParameter(ValueError):
    pass


class CorruptConfiguration(ValueError):
    pass


class ConsistencyError(ValueError):
    pass


class CapacityError(ValueError):
    pass


class InsufficientData(RuntimeError):
    pass


class NotAState(ValueError):
    pass


class NumericError(RuntimeError):
    pass
