"""Exception types shared across the package."""

from __future__ import annotations


class ErgomaxError(Exception):
    """Base class for all package errors."""


class ParameterError(ErgomaxError):
    """A map, observable, schedule, or model parameter is out of range."""


class NonFiniteState(ErgomaxError):
    """An orbit left the finite range (planar map escaping to infinity)."""

    def __init__(self, step_index: int, state=None):
        self.step_index = step_index
        self.state = state
        super().__init__(f"orbit state non-finite at step {step_index}")


class StreamTooShort(ErgomaxError):
    """A value stream ended before the last requested checkpoint."""


class OutOfRange(ErgomaxError):
    """A level is outside the range of the observable (no preimage)."""


class InsufficientRange(ErgomaxError):
    """Too few checkpoints (or too narrow a span) inside the fit range."""


class InsufficientMass(ErgomaxError):
    """Too few samples in balls/annuli to fit at the requested scales."""


class ZeroMass(ErgomaxError):
    """An empirical ball has no samples at all where mass is required."""


class BandInverted(ErgomaxError):
    """Lower band is not below upper band on the checked range."""


class ConfigInvalid(ErgomaxError):
    """Experiment config failed validation; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ReplayMismatch(ErgomaxError):
    """Replay produced an artifact differing from the recorded one."""

    def __init__(self, filename: str, row: int | None, detail: str = ""):
        self.filename = filename
        self.row = row
        where = f"{filename}" + (f", row {row}" if row is not None else "")
        super().__init__(f"replay mismatch in {where}" + (f": {detail}" if detail else ""))


class IoError(ErgomaxError):
    """Output directory or artifact could not be written/read."""
