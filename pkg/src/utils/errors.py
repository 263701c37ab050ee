#!/usr/bin/env python3
"""
Error types
Every failure raised by the toolkit carries the exit code the CLI reports
"""

from typing import Any, Dict, Optional


class MBNLAError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ParameterError(MBNLAError, ValueError):
    """Invalid parameter or precondition violation"""

    exit_code = 2


class InsufficientShotsError(ParameterError):
    """Record too small for the requested estimator"""


class NumericError(MBNLAError, ArithmeticError):
    """Non-convergent numerics or model failure"""

    exit_code = 3


class UnphysicalStateError(NumericError):
    """Covariance matrix violates the uncertainty principle"""


class DegenerateInputError(NumericError):
    """Zero variance where a conditioning or normalising variance is needed"""


class GainBoundError(NumericError):
    """Requested gain exceeds the largest gain for which the NLA output is physical"""

    def __init__(self, message: str, supremum_gain: float):
        super().__init__(message, {'supremum_gain': supremum_gain})
        self.supremum_gain = supremum_gain


class EmptyEnsembleError(NumericError):
    """Post-selection accepted no shots"""

    def __init__(self, message: str, p_success: float, n_in: int):
        # rule of three: 95% upper bound on the acceptance probability
        upper = 3.0 / n_in if n_in > 0 else 1.0
        super().__init__(message, {'p_success': p_success, 'n_in': n_in,
                                   'p_success_upper': upper})
        self.p_success = p_success
        self.n_in = n_in
        self.p_success_upper = upper


class RecordFormatError(MBNLAError, OSError):
    """Record file is malformed or fails its digest check"""

    exit_code = 4


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to a CLI exit code

    Args:
        error: Raised exception

    Returns:
        Exit code (2 parameter, 3 numeric/model, 4 I/O, 1 otherwise)
    """
    if isinstance(error, MBNLAError):
        return error.exit_code
    if isinstance(error, OSError):
        return 4
    return 1
