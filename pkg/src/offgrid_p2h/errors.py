"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``code`` and a ``context`` dict
so the CLI can emit ``{code, message, context}`` without string parsing.
"""

from __future__ import annotations


class P2HError(Exception):
    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self), "context": self.context}


class ConfigError(P2HError):
    code = "config_error"


# -- data ingest -------------------------------------------------------------
class IngestError(P2HError):
    code = "ingest_error"


class MissingColumn(IngestError):
    code = "missing_column"


class NonMonotonicTime(IngestError):
    code = "non_monotonic_time"


class IrregularStep(IngestError):
    code = "irregular_step"


class NegativeValue(IngestError):
    code = "negative_value"


class IncompatibleStep(IngestError):
    code = "incompatible_step"


class HorizonExceedsData(IngestError):
    code = "horizon_exceeds_data"


# -- plant -------------------------------------------------------------------
class IllegalTransition(P2HError):
    code = "illegal_transition"


class MinDownViolation(P2HError):
    code = "min_down_violation"


# -- scheduling ---------------------------------------------------------------
class DimensionMismatch(P2HError):
    code = "dimension_mismatch"


class Infeasible(P2HError):
    code = "infeasible"


class SolverTimeout(P2HError):
    code = "timeout"


class TooLarge(P2HError):
    code = "too_large"


# -- controllers --------------------------------------------------------------
class WarmUp(P2HError):
    code = "warm_up"


class NoAdjustableUnit(P2HError):
    code = "no_adjustable_unit"


class InsufficientSamples(P2HError):
    code = "insufficient_samples"


class InsufficientHeadroom(P2HError):
    code = "insufficient_headroom"

    def __init__(self, message: str, executed_mw: float = 0.0, commands=None, **context):
        super().__init__(message, executed_mw=executed_mw, **context)
        self.executed_mw = executed_mw
        self.commands = commands


# -- costing / sizing ----------------------------------------------------------
class ZeroHydrogen(P2HError):
    code = "zero_hydrogen"


class ExhaustedIterations(P2HError):
    code = "exhausted_iterations"


class PreconditionError(P2HError):
    code = "precondition"
