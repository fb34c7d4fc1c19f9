"""Exception hierarchy shared by all pipeforge modules."""


class PipeforgeError(Exception):
    """Base class for all pipeline model and generation errors."""


class DuplicateSignalError(PipeforgeError):
    pass


class ZeroWidthError(PipeforgeError):
    pass


class BranchClosedError(PipeforgeError):
    pass


class SelfMergeError(PipeforgeError):
    pass


class UnknownSignalError(PipeforgeError):
    def __init__(self, signal: str, zone: str):
        super().__init__(f"signal {signal!r} is not declared upstream of zone {zone!r}")
        self.signal = signal
        self.zone = zone


class CycleDetectedError(PipeforgeError):
    pass


class NoPathError(PipeforgeError):
    pass


class UnbalancedPathsError(PipeforgeError):
    pass


class MissingLatencyError(PipeforgeError):
    pass


class MultiOutputBackpressureError(PipeforgeError):
    pass


class WidthMismatchError(PipeforgeError):
    pass


class PortMismatchError(PipeforgeError):
    pass


class NoResponseError(PipeforgeError):
    pass


class SimulationError(PipeforgeError):
    pass


class ConfigError(PipeforgeError):
    """Invalid run configuration or spec file (CLI exit code 2)."""
