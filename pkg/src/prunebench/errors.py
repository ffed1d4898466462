"""Exception hierarchy. Every error raised on purpose by the package derives
from :class:`PruneBenchError`."""


class PruneBenchError(Exception):
    pass


class DimensionError(PruneBenchError, ValueError):
    """Operand shapes do not line up."""


class DomainError(PruneBenchError, ValueError):
    """An argument is outside the set of values the operation accepts."""


class EmptyNetworkError(PruneBenchError):
    """Pruning would leave no nonzero parameter to renormalize against."""


class TrainingDivergedError(PruneBenchError):
    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss={loss!r})")


class DataError(PruneBenchError):
    """Base class for problems with dataset files."""


class FormatError(DataError):
    """Bytes do not follow the expected file format."""


class LengthError(FormatError):
    """Payload is shorter (or longer) than its header promises."""


class ConsistencyError(DataError):
    """Two files that must agree (e.g. images and labels) do not."""


class IntegrityError(DataError):
    """A cached file does not have its published size."""
