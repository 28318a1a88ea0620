"""Exception hierarchy shared by all heatobs modules.

Every error raised by the library derives from HeatObsError so the CLI can
translate any module failure into its exit-code contract (1 = could not run,
2 = a check ran and failed).
"""


class HeatObsError(Exception):
    """Base class for all heatobs errors."""


class InvalidParameter(HeatObsError):
    """An argument violates a numeric precondition (range, sign, order)."""


class GridMismatch(HeatObsError):
    """Two fields that must share a GridSpec do not."""


class NonFinite(HeatObsError):
    """NaN or Inf appeared where finite values are required."""


class InvalidGeometry(HeatObsError):
    """Observation-region geometry is inconsistent (cube/ball/box sizes)."""


class ResolutionTooCoarse(HeatObsError):
    """The lattice cannot resolve a requested geometric feature."""


class IndexOutOfRange(HeatObsError):
    """A cube/ball index does not exist in the region."""


class BlowUp(HeatObsError):
    """A trajectory exceeded the sup-norm threshold (local existence lost)."""


class NoContraction(HeatObsError):
    """The fixed-point iteration stopped contracting."""


class ZeroInitialData(HeatObsError):
    """An operation requires nonzero initial data."""


class ZeroDenominator(HeatObsError):
    """A ratio's denominator vanished (localized mass identically zero)."""


class EmptyWindow(HeatObsError):
    """A requested time window contains no trajectory samples."""


class BoundarySample(HeatObsError):
    """A time-derivative check was requested at the edge of its window."""


class InsufficientSamples(HeatObsError):
    """Too few trace samples to form the requested finite differences."""


class NonPositiveG(HeatObsError):
    """The three-point convexity check needs strictly positive samples."""


class BadOrdering(HeatObsError):
    """Time points violate the required strict ordering."""


class ZeroTerminalMass(HeatObsError):
    """The terminal ball mass in a localization estimate is zero."""


class ZeroEnergy(HeatObsError):
    """A local energy normalizer is zero while the estimate needs it."""


class ZeroBallMass(HeatObsError):
    """Observed ball mass is zero while the cube mass is not (anomaly)."""


class ZeroDifference(HeatObsError):
    """The solution difference vanished at a sampled time."""


class ZeroInitialDifference(HeatObsError):
    """The two trajectories start from identical data."""


class ZeroLaterDifference(HeatObsError):
    """The difference vanished at a positive time but not at zero (anomaly)."""


class ZeroObservation(HeatObsError):
    """The observed mass over the observation set is zero (anomaly)."""


class InsufficientData(HeatObsError):
    """An ensemble fit needs more usable samples."""


class NonPositiveTriple(HeatObsError):
    """An ensemble triple contains a nonpositive entry where positivity is required."""


class ExponentOutOfRange(HeatObsError):
    """A nonlinearity exponent violates the admissible range for the check."""


class IntegrationFailure(HeatObsError):
    """The adaptive ODE integrator did not reach the requested time."""


class ConfigInvalid(HeatObsError):
    """An experiment configuration failed validation."""


class NoReports(HeatObsError):
    """A report merge found no report files."""
