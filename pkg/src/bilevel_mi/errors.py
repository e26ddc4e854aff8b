"""Exception types shared across the package."""


class BilevelMIError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BilevelMIError, ValueError):
    pass


class NumericDomainError(BilevelMIError, ArithmeticError):
    """A quadrature integrand produced a non-finite value.

    ``node`` holds the abscissa (scalar or pair) where it happened.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DegenerateSigmaError(BilevelMIError, ArithmeticError):
    """Third head equation left no room for a positive noise variance."""

    def __init__(self, rhs, signal):
        super().__init__(
            f"sigma^2 = {rhs!r} - {signal!r} is not positive"
        )
        self.rhs = rhs
        self.signal = signal


class DegenerateSigmaTauError(BilevelMIError, ArithmeticError):
    """Sixth equation has no positive solution for sigma*tau."""


class ConvergenceError(BilevelMIError, RuntimeError):
    def __init__(self, message, best_residual=float("nan"), state=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.state = state


class IntegrationError(BilevelMIError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingError(BilevelMIError, RuntimeError):
    def __init__(self, message, gradient_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.gradient_norm = gradient_norm
        self.iterations = iterations
