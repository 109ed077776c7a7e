"""Exception types shared across the package."""


class ConeDynError(Exception):
    """Base class for all conedyn errors."""


class DomainError(ConeDynError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested at the cone apex (l = 0) where the state is singular."""


class InfeasibleOrbitError(ConeDynError, ValueError):
    """Orbit parameters violate a feasibility bound (e.g. negative discriminant).

    Cannot arise from a consistent phase-space state; signals inconsistent input.
    """


class SingularityApproachError(ConeDynError, RuntimeError):
    """The integrator got unphysically close to the apex on a J != 0 run.

    The exact flow keeps |l| above its lower bound, so reaching the guard
    radius means the tolerance was too loose for the requested run.  The last
    accepted state is attached for diagnostics.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class AccuracyError(ConeDynError, RuntimeError):
    """A numerical routine could not reach the requested accuracy.

    ``estimate`` carries the best value obtained before giving up.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
