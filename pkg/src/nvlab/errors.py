"""Exception types shared across the package."""


class DomainZero(ValueError):
    """Argument outside the domain (zero where a value must be nonzero)."""


class BranchCut(ValueError):
    """Argument on the branch cut of a principal-branch function."""


class SupportViolation(ValueError):
    """Input field carries too much mass near the grid boundary."""


class GridTooCoarse(ValueError):
    """Grid resolution insufficient for the requested solve."""


class GridTooSmall(ValueError):
    """Grid domain too small to hold the requested object."""


class NotConverged(RuntimeError):
    """An operation required a converged solution but got none."""


class DirichletEigenvalue(RuntimeError):
    """Interior Dirichlet solve is singular (zero is an eigenvalue)."""


class SolverSingular(RuntimeError):
    """Linear solve failed; point flagged as exceptional-suspect."""


class NotConductivityType(ValueError):
    """Data failed the reality/positivity check of the conductivity route."""


class DegenerateParams(ValueError):
    """Closed-form solution parameters hit a degenerate combination."""


class SingularPoint(ValueError):
    """Closed-form evaluator queried on its singular set."""


class NonPositiveSigma(ValueError):
    """Conductivity must be bounded below by a positive constant."""


class MatrixTooLarge(ValueError):
    """Dense discretization would exceed the configured size limit."""


class BlowupDetected(RuntimeError):
    """Time evolution tripped the blow-up criterion."""

    def __init__(self, time: float, reason: str):
        super().__init__(f"blow-up flagged at t={time:.6g}: {reason}")
        self.time = time
        self.reason = reason


class NonFinite(RuntimeError):
    """A state stopped being finite during evolution."""
