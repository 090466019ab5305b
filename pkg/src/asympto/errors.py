"""Exception taxonomy shared by all modules.

Everything raised on purpose derives from AsymptoError so callers (and the CLI)
can map operational failures to a single exit path.  Verdict-style outcomes
(a fit that finds no constants, a check that fails on the window) are returned
as report objects, not raised.
"""

from __future__ import annotations


class AsymptoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigInvalid(AsymptoError):
    """Malformed or out-of-range configuration, file schema, or parameters."""


class WindowExceeded(AsymptoError):
    """An index or evaluation point needs the sequence beyond its safe window."""


class NotLogConvex(AsymptoError):
    """Operation requires nondecreasing quotients and the sequence has none."""


class PreconditionFailed(AsymptoError):
    """A documented precondition of an operation could not be certified."""


class TailTruncationDominant(AsymptoError):
    """A truncated tail sum is too unreliable to certify a positive verdict."""


class Inconsistent(AsymptoError):
    """Two estimation routes disagree; the window is too short to decide."""


class QuadratureNotConverged(AsymptoError):
    """Numerical integration failed to reach its error target."""


class OutsideSector(AsymptoError):
    """Evaluation point lies outside the declared sector of validity."""


class OutsideAperture(OutsideSector):
    """Transform direction/aperture constraint violated."""


class PathOutsideSector(OutsideSector):
    """An integration path leaves the domain of the integrand."""


class GrowthCapExceeded(AsymptoError):
    """Declared growth of the integrand defeats the kernel decay."""


class MittagLefflerDomainExceeded(AsymptoError):
    """Series evaluation of the Mittag-Leffler kernel cannot reach the target."""


class MomentsMissing(AsymptoError):
    """Not enough moment values for the requested coefficient range."""


class NotShiftedEquivalent(PreconditionFailed):
    """Kernel moments are not equivalent to the shifted weight sequence."""


class EmptySeries(AsymptoError):
    """A formal series with no coefficients where at least one is required."""


class IllConditioned(AsymptoError):
    """Extraction/estimation error bound exceeds the tolerated fraction.

    Carries `partial`: whatever was reliably computed before the trip point.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NotSmallO(AsymptoError):
    """The comparison sequence is not asymptotically negligible."""


class ReportedPartial(AsymptoError):
    """A multi-item audit finished but could not certify every item.

    Carries `report`: the full report object with per-item outcomes, so the
    caller can inspect what did and did not converge on the given window.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class IoError(AsymptoError):
    """A file could not be read, parsed against its schema, or written."""


class InputTrendViolated(AsymptoError):
    """An input sequence does not have the summability/monotone trend required."""


class ConstructionFailed(AsymptoError):
    """All throttling levels of a constructive procedure failed their audits."""
