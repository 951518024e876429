"""Exception hierarchy. Every error carries a machine-readable ``code``."""

from __future__ import annotations


class CarpoolError(Exception):
    """Base class for all carpoolflow errors."""

    code = "error"


# network construction / queries

class DuplicateIdError(CarpoolError):
    code = "duplicate-id"


class UnknownEndpointError(CarpoolError):
    code = "unknown-endpoint"


class SelfLoopError(CarpoolError):
    code = "self-loop"


class UnknownNodeError(CarpoolError):
    code = "unknown-node"


class NetworkTooLargeError(CarpoolError):
    """Path enumeration is capped; carpooling networks are small by design."""

    code = "network-too-large"


# trace simplification

class NoIntersectionError(CarpoolError):
    code = "no-intersection"


# flow / waiting-time profiles

class LineMismatchError(CarpoolError):
    code = "line-mismatch"


class GridMismatchError(CarpoolError):
    code = "grid-mismatch"


class ZeroRateError(CarpoolError):
    code = "zero-rate"


# participation

class ZeroPopulationError(CarpoolError):
    code = "zero-population"


class RoutingError(CarpoolError):
    """A single routing request failed (HTTP error, bad payload, timeout)."""

    code = "routing-failed"


# simulation

class InfeasibleScenarioError(CarpoolError):
    code = "infeasible-scenario"


# ingestion / configuration

class ParseError(CarpoolError):
    code = "parse"

    def __init__(self, message: str, path: str | None = None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:" if line_no is None else f"{path}:{line_no}:"
        super().__init__(f"{where} {message}" if where else message)


class EmptyInputError(CarpoolError):
    code = "empty-input"


class ConfigError(CarpoolError):
    code = "config"


class UsageError(CarpoolError):
    code = "usage"
