"""Exception types raised across the package."""


class BagstlsError(Exception):
    """Base class for all package errors."""


class NumericalError(BagstlsError):
    """A numerical failure (mapped to CLI exit code 3)."""


class SingularDesign(NumericalError):
    def __init__(self, rho1, rho2, message=None):
        self.rho1 = rho1
        self.rho2 = rho2
        super().__init__(
            message or f"design is numerically singular (rho1={rho1:.3e}, rho2={rho2:.3e})"
        )


class DimensionMismatch(BagstlsError, ValueError):
    pass


class EmptySupport(BagstlsError, ValueError):
    pass


class ConstantColumn(BagstlsError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"covariate column {column} has zero variance")


class NoConvergence(NumericalError):
    def __init__(self, iterations, delta):
        self.iterations = iterations
        self.delta = delta
        super().__init__(
            f"coordinate descent did not converge after {iterations} sweeps "
            f"(last max change {delta:.3e})"
        )


class ReplicateSingular(NumericalError):
    def __init__(self, replicate):
        self.replicate = replicate
        super().__init__(f"replicate {replicate} has a singular design")


class AllReplicatesFailed(NumericalError):
    def __init__(self, failed, total):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} replicates failed")


class NumericalBreakdown(NumericalError):
    pass


class BlowUp(NumericalError):
    def __init__(self, time):
        self.time = time
        super().__init__(f"trajectory exceeded 1e12 at t={time:.6g}")


class DegenerateSpacing(BagstlsError, ValueError):
    pass


class EmptySamples(BagstlsError, ValueError):
    pass


class ConfigError(BagstlsError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
