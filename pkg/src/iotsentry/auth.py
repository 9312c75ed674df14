"""Local token issuance and validation.

A pluggable identity seam: the default issuer signs compact HMAC tokens
carrying the subject, role, and institution scope, so a federation adapter
can replace issuance later without touching routes or claims.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass

from .clock import now
from .domain import Principal, Role
from .errors import BadCredentials, TokenExpired, TokenInvalid


@dataclass(frozen=True)
class AuthToken:
    subject: str
    role: Role
    institutions: frozenset[str]
    issued_at: float
    expires_at: float
    signature: str
    text: str  # full wire form


@dataclass(frozen=True)
class UserAccount:
    username: str
    password_sha256: str
    role: Role
    institutions: frozenset[str]


def _hash_password(password: str) -> str:
    return hashlib.sha256(password.encode()).hexdigest()


class UserStore:
    """Config-seeded local accounts; federation stays out of scope."""

    def __init__(self):
        self._users: dict[str, UserAccount] = {}

    def add_user(self, username: str, password: str, role: Role, institutions) -> UserAccount:
        account = UserAccount(username, _hash_password(password), role, frozenset(institutions))
        self._users[username] = account
        return account

    def verify(self, username: str, password: str) -> UserAccount:
        account = self._users.get(username)
        if account is None or not hmac.compare_digest(account.password_sha256, _hash_password(password)):
            raise BadCredentials("unknown user or wrong password")
        return account

    def get(self, username: str) -> UserAccount | None:
        return self._users.get(username)


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def _unb64(text: str) -> bytes:
    pad = -len(text) % 4
    return base64.urlsafe_b64decode(text + "=" * pad)


class TokenIssuer:
    """HMAC-SHA256 signed bearer tokens with expiry.

    Wire form: ``b64url(payload-json).hex(hmac)``. The hex signature makes
    every mutated character detectable (no unused trailing bits as in
    base64's final symbol).
    """

    def __init__(self, secret: str | None = None, ttl_seconds: float = 8 * 3600):
        self._secret = (secret or secrets.token_hex(32)).encode()
        self.ttl_seconds = ttl_seconds

    def _sign(self, payload_b64: str) -> str:
        return hmac.new(self._secret, payload_b64.encode(), hashlib.sha256).hexdigest()

    def issue(self, subject: str, role: Role, institutions, ttl_seconds: float | None = None) -> AuthToken:
        issued = now()
        expires = issued + (ttl_seconds if ttl_seconds is not None else self.ttl_seconds)
        payload = {
            "sub": subject,
            "role": role.value,
            "insts": sorted(institutions),
            "iat": issued,
            "exp": expires,
        }
        payload_b64 = _b64(json.dumps(payload, separators=(",", ":")).encode())
        signature = self._sign(payload_b64)
        return AuthToken(
            subject=subject,
            role=role,
            institutions=frozenset(institutions),
            issued_at=issued,
            expires_at=expires,
            signature=signature,
            text=f"{payload_b64}.{signature}",
        )

    def issue_for(self, account: UserAccount) -> AuthToken:
        return self.issue(account.username, account.role, account.institutions)

    def validate(self, token_text: str) -> Principal:
        """Principal for a valid token; tampering and expiry are distinct errors."""
        parts = token_text.split(".")
        if len(parts) != 2:
            raise TokenInvalid("token must be payload.signature")
        payload_b64, signature = parts
        expected = self._sign(payload_b64)
        if not hmac.compare_digest(expected, signature):
            raise TokenInvalid("signature mismatch")
        try:
            payload = json.loads(_unb64(payload_b64))
            subject = payload["sub"]
            role = Role(payload["role"])
            institutions = frozenset(payload["insts"])
            expires = float(payload["exp"])
        except Exception:
            raise TokenInvalid("malformed token payload") from None
        if expires <= now():
            raise TokenExpired(f"token for {subject} expired")
        return Principal(subject=subject, role=role, institutions=institutions)
