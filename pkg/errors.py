"""
Error types for the random digraph cutoff lab

Every failure the library can report is a SimulationError carrying a
human readable detail and the process exit code the CLI should return,
in the same spirit as an HTTP error carrying its status code.
"""

# Exit codes returned by main.py
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RESAMPLE_CAP = 3
EXIT_VERIFICATION = 4


class SimulationError(Exception):
    """
    Base class for all library errors

    Args:
        detail: Message shown to the user
        exit_code: Exit code used by the CLI when this error escapes a command
    """

    exit_code = EXIT_FAILURE

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class InputError(SimulationError):
    """Invalid input data (degree sequences, config files, graph files)"""

    exit_code = EXIT_CONFIG


# Degree sequences

class EmptySequence(InputError):
    pass


class ZeroDegree(InputError):
    pass


class SumMismatch(InputError):
    pass


class DegenerateMu(InputError):
    pass


class DegenerateDelta(InputError):
    pass


# Sampling and walks

class KOutOfRange(SimulationError):
    pass


class ContextMismatch(SimulationError):
    pass


class NotStronglyConnected(SimulationError):
    pass


class NoConvergence(SimulationError):
    pass


class RhoOne(SimulationError):
    pass


class DegenerateWindow(SimulationError):
    pass


class StateSpaceTooLarge(SimulationError):
    pass


class ExplosionGuard(SimulationError):
    pass


class InvalidParameter(SimulationError):
    pass


class PoolLabelMismatch(SimulationError):
    pass


# CLI level

class ConfigError(InputError):
    pass


class FileFormatError(InputError):
    pass


class ResampleCapExceeded(SimulationError):
    exit_code = EXIT_RESAMPLE_CAP


class VerificationFailed(SimulationError):
    exit_code = EXIT_VERIFICATION
