"""
Exceptions raised across the rate allocation pipeline
"""


class RDAllocError(Exception):
    pass


class IngestionError(RDAllocError):
    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super(IngestionError, self).__init__(message)
        self.line = line


class ShapeError(RDAllocError, ValueError):
    pass


class InfeasibleError(RDAllocError):
    """
    Raised when a quality threshold cannot be met; `constraint` names it
    ("min_worst_quality" or "min_avg_quality") so the caller knows what to relax.
    """

    def __init__(self, constraint, message):
        super(InfeasibleError, self).__init__("%s infeasible: %s" % (constraint, message))
        self.constraint = constraint


class InstanceTooLargeError(RDAllocError):
    pass


class ConvergenceWarning(UserWarning):
    pass
