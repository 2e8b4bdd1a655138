"""
Created on 2026-10-18

Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the command line reports for it.

@author: wf
"""

from typing import Optional

import numpy as np


class LangevinCvError(Exception):
    """
    base class of all errors raised by langevincv
    """

    exit_code = 1


class ParameterError(LangevinCvError, ValueError):
    """
    a parameter is out of its admissible range
    """

    exit_code = 2


class ConfigError(LangevinCvError):
    """
    an experiment configuration is invalid
    """

    exit_code = 2


class ShapeError(LangevinCvError, ValueError):
    """
    array dimensions do not match
    """

    exit_code = 2


class DataError(LangevinCvError):
    """
    input data is empty or malformed
    """

    exit_code = 3


class IngestionError(DataError):
    """
    a dataset file could not be read

    Attributes:
        row: 1-based data row index the problem was found in (None if not row specific)
    """

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericError(LangevinCvError):
    """
    a computation produced non finite values or failed numerically
    """

    exit_code = 4

    def __init__(self, message: str, x: Optional[np.ndarray] = None):
        super().__init__(message)
        self.x = x


class DivergenceError(NumericError):
    """
    a Markov chain left the finite floating point range

    Attributes:
        step: index of the kernel application that produced the non finite state
        replica: replica index if raised from a replica batch
        x: last finite state
    """

    def __init__(
        self,
        message: str,
        step: int,
        x: Optional[np.ndarray] = None,
        replica: Optional[int] = None,
    ):
        prefix = f"replica {replica}: " if replica is not None else ""
        super().__init__(f"{prefix}{message} at step {step}", x=x)
        self.reason = message
        self.step = step
        self.replica = replica

    def for_replica(self, replica: int) -> "DivergenceError":
        """
        return a copy of this error tagged with the given replica index
        """
        error = DivergenceError(self.reason, step=self.step, x=self.x, replica=replica)
        return error

    def __reduce__(self):
        return DivergenceError, (self.reason, self.step, self.x, self.replica)


class ConvergenceError(NumericError):
    """
    an iterative solver exhausted its iteration budget

    Attributes:
        x: last iterate
        grad_norm: gradient norm at the last iterate
    """

    def __init__(self, message: str, x: np.ndarray, grad_norm: float):
        super().__init__(f"{message} (|grad|={grad_norm:.3e})", x=x)
        self.reason = message
        self.grad_norm = grad_norm

    def __reduce__(self):
        return ConvergenceError, (self.reason, self.x, self.grad_norm)
