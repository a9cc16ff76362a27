from __future__ import annotations


class ParameterError(ValueError):
    """
    Exception raised when a model or experiment parameter is out of range,
    for example a percolation probability outside of (0, 1).
    """


class FeasibilityError(ValueError):
    """
    Exception raised when an exhaustive computation has been requested on an
    object that is too large to enumerate.
    """


class PreconditionError(ValueError):
    """
    Exception raised when the arguments of an operation are valid on their own,
    but the environment doesn't satisfy what the operation needs (e.g. a vertex
    that should be a pre-regeneration point isn't one).
    """


class ConnectivityError(Exception):
    """
    Exception raised if two terminals of an electrical network aren't connected
    by open edges.
    """


class NetworkError(RuntimeError):
    """
    Exception raised if a linear solve on a network Laplacian fails although
    the network is connected.
    """


class CycleSourceError(Exception):
    """
    Exception raised when a cycle source can't provide any more cycles.
    """


class WalkBoundaryError(Exception):
    """
    Exception raised when a simulated walk leaves the safe region of its window.

    The caller is expected to retry with a wider window.
    """

    def __init__(self, step: int, position: tuple[int, int], message: str = ""):
        self.step = step
        self.position = position
        super().__init__(
            message or f"walk left the safe window at step {step} (at {position})"
        )


class InsufficientDataError(ValueError):
    """
    Exception raised if an estimator doesn't get enough samples.
    """


class WindowFormatError(ValueError):
    """
    Exception raised when a serialized window can't be parsed.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """
    Exception raised for invalid experiment configuration files or values.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OracleFailure(AssertionError):
    """
    Exception raised by the self test if an exact identity doesn't hold.
    """

    def __init__(self, check: str, message: str):
        self.check = check
        super().__init__(f"{check}: {message}")
