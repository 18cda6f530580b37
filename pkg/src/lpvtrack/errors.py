"""Exception types shared across the package."""


class LpvTrackError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LpvTrackError):
    """Malformed or incomplete run configuration."""


class DegenerateSpeed(LpvTrackError):
    """Longitudinal speed too low for the slip formulas to be well defined."""


class NonpositiveLoad(LpvTrackError):
    """Tire normal load must be strictly positive."""


class SingularDenominator(LpvTrackError):
    """Effective-stiffness denominator vanished (only possible at zero load)."""


class InvalidBounds(LpvTrackError):
    """Saturation bounds must satisfy upper > lower."""


class SingularGeometry(LpvTrackError):
    """Wheelbase collapsed: the axle-load system is singular."""


class LoopDiverged(LpvTrackError):
    """The saturation algebraic loop did not reach its fixed point."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"algebraic loop did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class ManeuverInfeasible(LpvTrackError):
    """Open-loop maneuver missed its lateral displacement band or diverged."""


class Diverged(LpvTrackError):
    """Closed-loop simulation exceeded the blow-up bound."""


class SingularLoop(LpvTrackError):
    """I - D_sigma K_sigma is too ill conditioned to close the sector loop."""


class DegenerateFamily(LpvTrackError):
    """No matrix entry varies along the trajectory; nothing to schedule on."""


class TooManyParameters(LpvTrackError):
    """Vertex count 2^q would explode past the configured guard."""


class InvalidStrip(LpvTrackError):
    """Strip bounds must satisfy lambda_min < lambda_max < 0."""


class SolverStalled(LpvTrackError):
    """The SDP backend gave up before reaching a verdict."""
