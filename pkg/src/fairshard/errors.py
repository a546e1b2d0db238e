"""Exception types shared across the package."""


class FairshardError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatch(FairshardError):
    """Inputs whose shapes or lengths do not line up."""


class EmptyTrainingSetError(FairshardError):
    """Training was requested on an empty sample list."""


class DataFormatError(FairshardError):
    """Malformed CSV/JSON payloads; the message carries the offending location."""


class PartitionError(FairshardError):
    """A shard/slice partition cannot be built or does not cover the dataset."""


class UnknownSampleError(FairshardError):
    """A referenced sample id is not present in the dataset."""


class UnsupportedCellError(FairshardError):
    """A rate is conditioned on an (attribute, label) cell with zero support."""


class DegenerateJointError(FairshardError):
    """A joint distribution lacks the mass needed to state the parity constraints."""


class InfeasibleError(FairshardError):
    """No point satisfies the constraint rows; ``row`` names a violated one."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class UnboundedError(FairshardError):
    """Objective unbounded below; impossible for box-constrained problems."""


class MissingEntryError(FairshardError):
    """A derived-predictor table has no probability for the requested cell."""
