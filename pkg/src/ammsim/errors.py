"""Exception hierarchy shared by all ammsim modules."""


class AmmError(Exception):
    """Base class for all ammsim errors."""


class InfeasibleWrench(AmmError):
    """Requested wrench needs rotor speeds outside [0, max_speed_sq]."""


class SingularMapping(AmmError):
    """Actuation map cannot realize the requested wrench components."""


class EmptyRange(AmmError):
    """Sweep range contains no sample points."""


class Unreachable(AmmError):
    """Platform pose outside the manipulator workspace (no IK solution)."""


class NoConvergence(AmmError):
    """Iterative solver failed to converge within the iteration budget."""


class SingularConfiguration(AmmError):
    """Manipulator Jacobian singular at the requested configuration."""


class SingularTask(AmmError):
    """Task-space inertia numerically singular (ill-conditioned J A^-1 J^T)."""


class NonFiniteState(AmmError):
    """Simulation state left the finite range (divergence)."""


class NearSingularArm(AmmError):
    """Arm Jacobian close to a fold; resolved-rate command unsafe."""


class InvalidScenario(AmmError):
    """Scenario definition fails validation."""


class EmptyWindow(AmmError):
    """Metrics window selects no trace samples."""


class EmptyTrace(AmmError):
    """Trace has no rows to compute a metric from."""
