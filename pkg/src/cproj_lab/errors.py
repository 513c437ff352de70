"""Exception hierarchy.  Every error carries a human-readable message."""


class CProjError(Exception):
    """Base class for all library errors."""


class DomainError(CProjError, ValueError):
    pass


class SignatureError(CProjError, ValueError):
    pass


class IllConditioned(CProjError):
    pass


class NotPositiveDefinite(CProjError):
    pass


class HermitianViolation(CProjError):
    pass


class NoStabilization(CProjError):
    pass


class SingularSolution(CProjError):
    pass


class DegenerateInput(CProjError, ValueError):
    pass


class ClusterAmbiguity(CProjError):
    pass


class NotPropertyP(CProjError):
    pass


class NonRegularPoint(CProjError):
    pass


class BoundaryExit(CProjError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepLimit(CProjError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NotHolomorphic(CProjError):
    pass


class OrbitExitsChart(CProjError):
    pass


class ExpressionResidualTooLarge(CProjError):
    pass
