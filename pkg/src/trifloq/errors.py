"""Exception taxonomy shared by all trifloq modules.

The split mirrors the module contracts: bad inputs are distinguished from
computations that reveal a violated structural assumption, and both are
distinguished from plain iteration failure.
"""


class TrifloqError(Exception):
    """Base class for all trifloq errors."""


class ArgumentError(TrifloqError):
    """Raised when an argument is invalid (wrong shape, zero vector, missing
    declaration, ...). Maps to CLI exit code 1."""


class StructureError(TrifloqError):
    """Raised when a structural check fails: the inputs were accepted but the
    computation contradicts a property the system class guarantees (positive
    simple multipliers, sigma labels, cooperativity floor on samples,
    monotone sign-change counts, ...). Usually signals either a violated
    precondition or a numerical breakdown. Maps to CLI exit code 2.
    """

    def __init__(self, msg, module=None, check=None):
        super().__init__(msg)
        self.module = module
        self.check = check


class ConvergenceError(TrifloqError):
    """Raised when an iterative method did not converge within its budget.

    Carries ``history`` (e.g. the sequence of direction gaps) so the caller
    can decide whether to extend the schedule.
    """

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history) if history is not None else []


class IntegrationError(TrifloqError):
    """Raised when the ODE solver aborts (step-size underflow, non-finite
    state, declared orbit bound exceeded)."""

    def __init__(self, msg, last_t=None, last_state=None):
        super().__init__(msg)
        self.last_t = last_t
        self.last_state = last_state


class InsufficientSamplingError(TrifloqError):
    """Raised when a fiber query has fewer points than required; carries the
    achieved count."""

    def __init__(self, msg, count):
        super().__init__(msg)
        self.count = count


class NoDichotomyError(TrifloqError):
    """Raised when a requested shift sits inside (or too close to) a
    spectral interval, so no exponential dichotomy exists there. This is
    the expected negative outcome of the spectrum membership test, not a
    structural failure."""

    def __init__(self, msg, lam=None, interval=None):
        super().__init__(msg)
        self.lam = lam
        self.interval = interval
