"""Exception taxonomy for the simulator.

Every error the engine can raise is a distinct class so tests and the
oracle-equivalence harness can compare failures by name. All inherit from
SimulationError; the CLI maps ConfigInvalid to exit code 2 and everything
else to exit code 3.
"""


class SimulationError(Exception):
    pass


# flash media
class BlockFull(SimulationError):
    pass


class EraseWithValidPages(SimulationError):
    pass


class NotValid(SimulationError):
    pass


class FreeBlock(SimulationError):
    pass


# ftl
class OutOfRange(SimulationError):
    pass


class Unmapped(SimulationError):
    pass


class DeviceWedged(SimulationError):
    pass


class NoVictim(SimulationError):
    pass


class InsufficientSpace(SimulationError):
    pass


# flashalloc
class OverlapWithActiveInstance(SimulationError):
    pass


class MalformedChunks(SimulationError):
    pass


class UnknownInstance(SimulationError):
    pass


# host model / workloads
class UnknownStream(SimulationError):
    pass


class ConfigInvalid(SimulationError):
    pass


class RegionOverlap(SimulationError):
    pass


# metrics
class EmptyWindow(SimulationError):
    pass


class DivByZeroGuard(SimulationError):
    pass


# trace
class TraceParseError(SimulationError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
