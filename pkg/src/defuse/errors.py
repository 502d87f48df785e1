"""Exception types shared across the package."""


class DefuseError(Exception):
    """Base class for all package-specific errors."""


class NonSquareInput(DefuseError):
    pass


class CycleDetected(DefuseError):
    """Raised when an adjacency matrix contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle: " + " -> ".join(str(v) for v in self.cycle))


class NodeOutOfRange(DefuseError):
    pass


class InvalidProbability(DefuseError):
    pass


class InvalidSize(DefuseError):
    pass


class CovarianceNotPD(DefuseError):
    pass


class ZeroVarianceColumn(DefuseError):
    pass


class SampleTooSmall(DefuseError):
    pass


class DegenerateSample(DefuseError):
    pass


class NonFiniteInput(DefuseError):
    pass


class ShapeMismatch(DefuseError):
    pass


class NonFiniteLoss(DefuseError):
    pass


class SizeMismatch(DefuseError):
    pass


class SingularDesign(DefuseError):
    pass


class EmptyList(DefuseError):
    pass


class NoProgress(DefuseError):
    pass


class ParseError(DefuseError):
    pass


class InvalidConfig(DefuseError):
    pass
