"""Exception hierarchy."""


class QuadHullError(Exception):
    """Base class for all errors raised by quadhull."""


class InvalidInputError(QuadHullError, ValueError):
    pass


class InfeasibleError(QuadHullError):
    """The set (polytope or quadric section) is empty."""


class UnboundedPolytopeError(QuadHullError):
    pass


class InconsistentSystemError(InfeasibleError):
    """A linear system reduces to 0 = nonzero."""


class CapacityError(QuadHullError):
    """A dimension cap was exceeded."""


class BudgetExceeded(QuadHullError):
    """The hull construction hit its leaf or depth budget."""


class InternalInconsistency(QuadHullError):
    """Two independent checks disagreed; carries a diagnostics payload."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverError(QuadHullError):
    """The conic solver did not reach an optimal status."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
