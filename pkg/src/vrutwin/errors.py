"""Exception hierarchy shared by every vrutwin module."""

from __future__ import annotations


class TwinError(Exception):
    """Base class for all errors raised by vrutwin."""


# geodesy
class DegenerateInput(TwinError, ValueError):
    pass


class NegativeArcLength(TwinError, ValueError):
    pass


# sensor ingest
class ParseError(TwinError, ValueError):
    pass


class ValidationError(TwinError, ValueError):
    pass


class NonMonotonicTimestamp(TwinError, ValueError):
    pass


class InvalidZone(TwinError, ValueError):
    pass


class InsufficientHistory(TwinError, ValueError):
    pass


class NoAlignedSample(TwinError, LookupError):
    pass


# predictor
class ShapeMismatch(TwinError, ValueError):
    pass


class LengthMismatch(TwinError, ValueError):
    pass


class EmptyInput(TwinError, ValueError):
    pass


class EmptyDataset(TwinError, ValueError):
    pass


class FormatError(TwinError, ValueError):
    pass


class VersionMismatch(FormatError):
    pass


class ConfigError(TwinError, ValueError):
    pass


# risk
class NonPositiveInput(TwinError, ValueError):
    pass


class ZeroDistance(TwinError, ArithmeticError):
    pass


# scenario generation
class Infeasible(TwinError, ValueError):
    pass
