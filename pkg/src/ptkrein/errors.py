class PTKreinError(Exception):
    """Base class for solver failures."""


class NoConvergence(PTKreinError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Newton did not converge after {iterations} iterations (residual {residual:.3e})")


class SingularJacobian(PTKreinError):
    """Restricted Jacobian not invertible: fold or symmetry-breaking point."""


class ConvergedToZero(PTKreinError):
    def __init__(self, power: float):
        self.power = power
        super().__init__(f"Newton converged to the trivial solution (power {power:.3e})")


class EigensolverFailure(PTKreinError):
    pass


class AdjointMatchFailure(PTKreinError):
    pass


class PhaseIncoherent(PTKreinError):
    """Pointwise PT phases disagree: eigenvector is not PT-normalizable."""


class AdjointUnavailable(PTKreinError):
    pass


class AmbiguousSign(PTKreinError):
    """Eigenvector and its negative are equally close to the previous step."""


class Unresolved(PTKreinError):
    """Coalescence verdict still ambiguous at maximum refinement."""


class InsufficientSamples(PTKreinError):
    pass


class BranchJump(PTKreinError):
    """Power changed by more than the allowed fraction between neighbouring solves."""
