class BeamTrackError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidGeometryError(BeamTrackError, ValueError):
    """Array geometry with a non-positive side or spacing."""


class InvalidAngleError(BeamTrackError, ValueError):
    """Physical angle outside the front hemisphere of the array."""


class InfeasibleAngleError(BeamTrackError, ValueError):
    """Virtual angle that no physical direction maps to."""


class DimensionMismatchError(BeamTrackError, ValueError):
    """Weight vector sized for a different array than the channel."""


class EstimationError(BeamTrackError, ValueError):
    """Channel gain estimation called without usable pilots."""


class SingularRatioError(BeamTrackError, ValueError):
    """Gain ratio evaluated where the reference gain vanishes."""


class SolverError(BeamTrackError, ValueError):
    """Offset solver given a ratio it cannot invert."""


class InvalidStateError(BeamTrackError, ValueError):
    """Tracker state that violates its own invariants."""


class ScenarioExhaustedError(BeamTrackError, ValueError):
    """Scenario asked for a time at which the tracked path is out of view."""
