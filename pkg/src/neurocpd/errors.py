"""Exception types raised by the solvers and the benchmark driver."""


class NeurocpdError(Exception):
    """Base class for all package-specific errors."""


class DivergenceError(NeurocpdError):
    """A solver produced non-finite values.

    Carries the iteration at which the blow-up was detected.
    """

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class SingularPreconditionerError(NeurocpdError):
    """Gram preconditioner is singular and no ridge was requested."""

    def __init__(self, mode):
        super().__init__(
            f"preconditioner for factor {mode} is singular with ridge=0; "
            "pass a positive ridge or leave it at the automatic default"
        )
        self.mode = mode


class BarrierDomainError(NeurocpdError):
    """A log-barrier quantity was requested at a nonpositive entry."""


class BoundaryStallError(NeurocpdError):
    """Barrier flow could not stay interior after the halving budget."""

    def __init__(self, iteration, halvings):
        super().__init__(
            f"barrier step stalled at the boundary after {halvings} halvings "
            f"(iteration {iteration})"
        )
        self.iteration = iteration


class ArmijoStallError(NeurocpdError):
    """Backtracking exhausted its budget on a block that is not converged."""

    def __init__(self, mode, shrinkages, residual):
        super().__init__(
            f"Armijo backtracking on factor {mode} exhausted {shrinkages} "
            f"shrinkages with projected-gradient residual {residual:.3e}"
        )
        self.mode = mode
        self.residual = residual


class StepMapInconsistencyError(NeurocpdError):
    """A clamped coordinate had zero gradient in the effective-step map."""


class CollinearityInfeasibleError(NeurocpdError):
    """Requested pairwise-collinearity range could not be met."""


class ConfigError(NeurocpdError):
    """Benchmark run configuration is invalid."""
