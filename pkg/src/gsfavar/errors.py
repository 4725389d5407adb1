"""Exception hierarchy.

Every error belongs to one of three families so the command line can map it
to an exit code: configuration (2), data (3) and numerical failure (4).
"""

from __future__ import annotations


class GsFavarError(Exception):
    exit_code = 1


class ConfigError(GsFavarError, ValueError):
    exit_code = 2


class DataError(GsFavarError, ValueError):
    exit_code = 3


class NumericalError(GsFavarError, ArithmeticError):
    exit_code = 4


# numeric core
class NonFiniteError(NumericalError):
    pass


class ShapeMismatch(ConfigError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DofTooSmall(ConfigError):
    pass


class RankDeficient(NumericalError):
    pass


class KOutOfRange(ConfigError):
    pass


class SeriesTooShort(DataError):
    pass


# data pipeline
class NonPositiveForLog(DataError):
    pass


class UnknownCode(DataError):
    pass


class MissingVariable(DataError):
    pass


class NonNumericCell(DataError):
    pass


class WindowTooShort(DataError):
    pass


class MissingValue(DataError):
    pass


class UnstableSpec(ConfigError):
    pass


# autoencoder
class DivergedLoss(NumericalError):
    pass


class EmptyGrid(ConfigError):
    pass


# VAR samplers
class ChainDiverged(NumericalError):
    def __init__(self, message: str, sweep: int | None = None):
        super().__init__(message if sweep is None else f"{message} (sweep {sweep})")
        self.sweep = sweep


class FilterBlewUp(NumericalError):
    pass


# forecasting / IRF
class ExplosiveForecast(NumericalError):
    pass


class OriginMismatch(ConfigError):
    pass


class BadOrdering(ConfigError):
    pass


class DrawCountMismatch(ConfigError):
    pass


class TimeOutOfRange(ConfigError):
    pass


# orchestration
class StaleArtifact(ConfigError):
    pass


class CorruptArtifact(DataError):
    pass
