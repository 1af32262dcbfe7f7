"""Exception types raised by clustergrape."""


class GraphParseError(ValueError):
    """Malformed graph text. Carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReductionError(RuntimeError):
    """The target state does not lie in the invariant subspace of the initial state."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual norm {residual:.3e})")


class OptimizationFailure(RuntimeError):
    """The optimizer could not reach the requested fidelity."""

    def __init__(self, message, fidelity):
        self.fidelity = fidelity
        super().__init__(f"{message} (achieved fidelity {fidelity:.6f})")
