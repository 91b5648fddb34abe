"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CrmarlError(Exception):
    """Base class for all package errors."""


class ValidationError(CrmarlError):
    """A value failed a structural check.

    ``code`` is a short machine-readable reason such as ``"missing-target"``.
    """

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class InvalidArgument(CrmarlError, ValueError):
    pass


class UnreachableGoal(CrmarlError):
    pass


class NoValidAction(CrmarlError):
    pass


class NoNegative(CrmarlError):
    """The adversary could not produce an action distinct from the chosen one.

    ``reason`` is one of ``exhausted``, ``collision`` or ``adv_failure``.
    """

    def __init__(self, reason: str = "exhausted", message: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class CandidateMissing(CrmarlError):
    pass


class SchemaMismatch(CrmarlError):
    pass


class ConfigError(CrmarlError):
    pass


class GatewayError(CrmarlError):
    """Remote completion failure; ``category`` is transport, auth, rate-limit or server."""

    def __init__(self, category: str, message: str = "", retriable: bool = False):
        self.category = category
        self.retriable = retriable
        super().__init__(f"{category}: {message}" if message else category)


class AuthError(GatewayError):
    def __init__(self, message: str = ""):
        super().__init__("auth", message, retriable=False)
