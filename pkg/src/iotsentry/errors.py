"""Exception hierarchy shared across the orchestrator.

Every error carries a stable machine-readable ``code`` so the API layer and
the CLI can map failures without string matching.
"""

from __future__ import annotations


class SentryError(Exception):
    """Base class; ``code`` is the stable identifier exposed on the wire."""

    code = "error"

    def __init__(self, message: str = "", **detail):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


# --- domain / lifecycle ---

class IllegalTransition(SentryError):
    code = "illegal_transition"


class Unauthorized(SentryError):
    code = "unauthorized"


# --- zeek ingest ---

class MissingFields(SentryError):
    code = "missing_fields"


class DuplicateField(SentryError):
    code = "duplicate_field"


class SourceUnavailable(SentryError):
    code = "source_unavailable"


# --- incidents ---

class AmbiguousLease(SentryError):
    code = "ambiguous_lease"


# --- firewall plane ---

class AliasNotFound(SentryError):
    code = "alias_not_found"


class InvalidAddress(SentryError):
    code = "invalid_address"


class FirewallUnreachable(SentryError):
    code = "firewall_unreachable"


class CommitRejected(SentryError):
    code = "commit_rejected"


class IpCollision(SentryError):
    code = "ip_collision"


# --- registry ---

class DuplicateMac(SentryError):
    code = "duplicate_mac"


class InvalidMac(SentryError):
    code = "invalid_mac"


class DeviceNotFound(SentryError):
    code = "device_not_found"


class NoFreeAddress(SentryError):
    code = "no_free_address"


# --- persistence ---

class UnknownStore(SentryError):
    code = "unknown_store"


class SchemaViolation(SentryError):
    code = "schema_violation"


class StorageUnavailable(SentryError):
    code = "storage_unavailable"


class FieldAlreadySet(SentryError):
    code = "field_already_set"


class MonotonicityViolation(SentryError):
    code = "monotonicity_violation"


# --- auth / api ---

class BadCredentials(SentryError):
    code = "bad_credentials"


class TokenExpired(SentryError):
    code = "token_expired"


class TokenInvalid(SentryError):
    code = "token_invalid"


# --- harness ---

class DeviceNotActive(SentryError):
    code = "device_not_active"


class ProbeTimeout(SentryError):
    code = "probe_timeout"


class ScenarioFailed(SentryError):
    code = "scenario_failed"

    def __init__(self, message: str = "", phase: str = "", partial_report=None, **detail):
        super().__init__(message, phase=phase, **detail)
        self.phase = phase
        self.partial_report = partial_report


# --- cli ---

class ConfigMissing(SentryError):
    code = "config_missing"


class ApiError(SentryError):
    """Client-side mirror of an HTTP error response."""

    code = "api_error"

    def __init__(self, status: int, code: str = "api_error", message: str = "", **detail):
        super().__init__(message, **detail)
        self.status = status
        self.code = code or "api_error"
