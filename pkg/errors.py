#!/usr/bin/env python3
"""
Errors - Error hierarchy for centered Metropolis-Hastings tooling

Every error is a ValueError carrying an upper-snake code, rendered as
"CODE: message" so callers can match on the code.
"""


class CmhiError(ValueError):
    code = "CMHI_ERROR"

    def __init__(self, message: str = ""):
        self.message = message
        super().__init__(f"{self.code}: {message}" if message else self.code)


class NotSpd(CmhiError):
    code = "NOT_SPD"


class NotSymmetric(CmhiError):
    code = "NOT_SYMMETRIC"


class DimensionMismatch(CmhiError):
    code = "DIMENSION_MISMATCH"


class ModelHasNoData(CmhiError):
    code = "MODEL_HAS_NO_DATA"


class RwmDimension(CmhiError):
    code = "RWM_DIMENSION"


class NonFiniteObjective(CmhiError):
    code = "NON_FINITE_OBJECTIVE"


class MeanMismatch(CmhiError):
    code = "MEAN_MISMATCH"


class ModeNotConverged(CmhiError):
    code = "MODE_NOT_CONVERGED"


class DominanceNotVerified(CmhiError):
    code = "DOMINANCE_NOT_VERIFIED"


class DimensionTooLarge(CmhiError):
    code = "DIMENSION_TOO_LARGE"


class GridTooCoarse(CmhiError):
    code = "GRID_TOO_COARSE"


class PowerIterationStalled(CmhiError):
    code = "POWER_ITERATION_STALLED"


class InvalidBound(CmhiError):
    code = "INVALID_BOUND"


class NotIndependenceKernel(CmhiError):
    code = "NOT_INDEPENDENCE_KERNEL"


class UnknownKind(CmhiError):
    code = "UNKNOWN_KIND"


class DatasetFormatError(CmhiError):
    code = "DATASET_FORMAT"


class NanFault(CmhiError):
    code = "NAN_FAULT"
