"""Exception hierarchy shared by all analysis modules.

Four broad failure classes are distinguished so that callers (and the CLI
exit-code mapping) can react uniformly:

* :class:`InputError` -- malformed caller data: non-finite entries, channel
  mismatches, traces that are too short, out-of-range channel indices.
* :class:`StructuralError` -- the data is finite but structurally unusable:
  dimension mismatches between state-space blocks, a subsystem that is not
  left invertible, an empty residual map.
* :class:`ContractError` -- a documented precondition was violated
  (budget below a threshold, asymptotic analysis on a non-Schur plant,
  requesting null directions of a full-rank matrix).
* :class:`NumericError` -- internal numerical breakdown: interpolation
  conditioning failures, overflow during simulation, retry exhaustion.
"""


class SecIndexError(Exception):
    """Base class for every error raised by this package."""


class InputError(SecIndexError, ValueError):
    """Caller-supplied data is malformed (NaN/Inf, wrong channel count, ...)."""


class StructuralError(SecIndexError, ValueError):
    """Model or subsystem structure rules out the requested operation."""


class ContractError(SecIndexError, ValueError):
    """A documented precondition of the operation was violated."""


class NumericError(SecIndexError, RuntimeError):
    """Internal numerical failure (conditioning, overflow, retries spent)."""


class PoleProximityError(InputError):
    """Evaluation frequency sits on or too close to a system pole."""

    def __init__(self, message: str, nearest_pole: complex):
        super().__init__(message)
        self.nearest_pole = nearest_pole
