"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class PathKGError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PathKGError):
    pass


class DataError(PathKGError, ValueError):
    """Input file or record does not satisfy its format contract."""


class MalformedRow(DataError):
    def __init__(self, line: int, message: str = "wrong column count"):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnknownEntityType(DataError):
    pass


class DuplicateSurface(DataError):
    pass


class UnknownRole(DataError):
    pass


class UnknownAction(DataError):
    pass


class PatientHasAction(DataError):
    pass


class RoleMismatch(PathKGError, ValueError):
    pass


class BudgetExhausted(PathKGError):
    pass


class IneligibleSample(PathKGError, ValueError):
    pass


class EvalError(PathKGError):
    pass


class JudgeError(PathKGError):
    pass


class GatewayError(PathKGError):
    """Failure talking to a generation endpoint."""

    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class TransportError(GatewayError):
    def __init__(self, status: int | None, attempts: int = 1, detail: str = ""):
        self.status = status
        self.detail = detail
        msg = f"transport failure status={status}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg, attempts)


class EndpointTimeout(GatewayError):
    def __init__(self, attempts: int = 1):
        super().__init__("request timed out", attempts)


class RateLimited(GatewayError):
    def __init__(self, attempts: int = 1):
        super().__init__("rate limited by endpoint", attempts)


class CassetteMiss(GatewayError):
    def __init__(self, request_hash: str):
        self.request_hash = request_hash
        super().__init__(f"no cassette entry for request {request_hash}")
