"""
Exception hierarchy for STVS Lab.
"""
from typing import Optional


class StvsError(Exception):
    """Base class for every error raised by the package."""


class GridFormatError(StvsError, ValueError):
    """Grid document could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 field: Optional[str] = None):
        self.line = line
        self.column = column
        self.field = field
        locus = []
        if line is not None:
            locus.append(f"line {line}")
        if column is not None:
            locus.append(f"column {column}")
        if field is not None:
            locus.append(f"field '{field}'")
        prefix = ", ".join(locus)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class GridValidationError(StvsError, ValueError):
    """A grid invariant is violated."""


class UnknownLineError(GridValidationError):
    """A named line does not exist or is not connected."""

    def __init__(self, pair):
        self.pair = tuple(pair)
        super().__init__(f"unknown or disconnected line {pair[0]}-{pair[1]}")


class IslandingError(GridValidationError):
    """Disconnecting lines would split the network."""

    def __init__(self, detail: str = ""):
        message = "grid islanded"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class PowerFlowError(StvsError):
    """Newton-Raphson power flow did not converge."""

    def __init__(self, mismatch: float, iterations: int, detail: str = ""):
        self.mismatch = mismatch
        self.iterations = iterations
        message = f"power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} p.u.)"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SingularMatrixError(StvsError, ValueError):
    """A matrix that must be factorized is singular."""


class MotorInitError(StvsError):
    """An induction motor has no steady-state operating point."""

    def __init__(self, bus: int, detail: str = ""):
        self.bus = bus
        message = f"motor at bus {bus} cannot be initialized"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class NetworkSolveError(StvsError):
    """Algebraic network equations diverged during integration."""

    def __init__(self, time: float, mismatch: float):
        self.time = time
        self.mismatch = mismatch
        super().__init__(f"network solve diverged at t={time:.3f} s (mismatch {mismatch:.3e})")


class SimulationError(StvsError, ValueError):
    """Invalid simulation arguments."""


class EquilibriumError(SimulationError):
    """The initialized dynamic state is not at rest."""


class TrajectoryError(StvsError, ValueError):
    """Trajectory record is malformed or unsuitable."""


class WindowError(StvsError, ValueError):
    """Requested feature window does not fit the trajectory."""


class ShapeError(StvsError, ValueError):
    """Tensor or matrix dimensions do not match."""


class TrainingError(StvsError):
    """Training could not proceed."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


class DatasetError(StvsError):
    """Dataset generation or loading failed."""


class CheckpointError(StvsError):
    """Checkpoint file is malformed."""
