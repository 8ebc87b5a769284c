"""Exception types shared across the package."""


class FiberSpinError(Exception):
    """Base class for all fiberspin errors."""


class ParameterError(FiberSpinError, ValueError):
    """Invalid physical or solver parameters (e.g. kappa >= 1)."""


class DomainError(FiberSpinError):
    """A state left the physical domain (u <= 0, q ~ 0, r <= 0, v^3 <= lambda^2).

    Raised by right-hand-side evaluations so that Newton/step-size loops can
    damp or truncate instead of propagating non-finite numbers.
    """


class PreconditionError(FiberSpinError, ValueError):
    """An analytic formula was evaluated outside its stated validity range."""


class StepBudgetExceeded(FiberSpinError):
    """The IVP integrator ran out of steps before reaching the end point."""


class StepUnderflow(FiberSpinError):
    """Adaptive step size fell below the machine-feasible minimum.

    Signals a singularity of the integrated system (for instance the inviscid
    angle equation blowing up as v^3 -> lambda^2).
    """


class OutOfSpan(FiberSpinError, ValueError):
    """Dense-output evaluation outside the integrated interval."""


class GuessFailure(FiberSpinError):
    """The inviscid starting guess could not be constructed on [0, L]."""


class NotConverged(FiberSpinError):
    """An operation required a converged solution but got an unconverged one."""


class NoBracket(FiberSpinError):
    """Boundary search could not bracket the convergence/failure transition."""
