"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and maps to a process
exit status through its base class: configuration problems exit 2, bad data
exits 3 and algorithmic failures exit 4.
"""

from __future__ import annotations

from typing import Any


class GeostreamError(Exception):
    code = "error"
    exit_status = 1

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(v: Any) -> Any:
    try:
        import numpy as np

        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
    except ImportError:  # pragma: no cover
        pass
    return v


class ConfigError(GeostreamError):
    code = "config"
    exit_status = 2


class DataError(GeostreamError):
    code = "data"
    exit_status = 3


class AlgorithmError(GeostreamError):
    code = "algorithm"
    exit_status = 4


# configuration
class SizeLimitError(ConfigError):
    code = "size_limit"


class OracleLimitError(ConfigError):
    code = "oracle_limit"


class ShapeMismatchError(ConfigError):
    code = "shape_mismatch"


class KindMismatchError(ConfigError):
    code = "kind_mismatch"


# data
class NonFiniteError(DataError):
    code = "non_finite"


class ZeroMatrixError(DataError):
    code = "zero_matrix"


class EmptyCoresetError(DataError):
    code = "empty_coreset"


class EmptyStreamError(DataError):
    code = "empty_stream"


class InsufficientRowsError(DataError):
    code = "insufficient_rows"


class NormBandError(DataError):
    code = "norm_band"


class StreamOverflowError(DataError):
    code = "stream_overflow"


class DegenerateWeightsError(DataError):
    code = "degenerate_weights"


class DegenerateInputError(DataError):
    code = "degenerate_input"


class RankDeficientError(DataError):
    code = "rank_deficient"


class FormatError(DataError):
    code = "format"


# algorithmic
class SingularQuadraticError(AlgorithmError):
    code = "singular_quadratic"


class PassBudgetExceededError(AlgorithmError):
    code = "pass_budget_exceeded"


class UnboundedError(AlgorithmError):
    code = "unbounded"


class NoConvergenceError(AlgorithmError):
    code = "no_convergence"

    def __init__(self, message: str = "", best: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.best = best


class RetryBudgetError(AlgorithmError):
    code = "retry_budget"

    def __init__(self, message: str = "", best: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.best = best


class IoError(DataError):
    code = "io"
