"""MAC and IPv4 address normalization.

All MAC comparisons in the orchestrator happen on the canonical form:
lowercase, colon-separated octets.
"""

from __future__ import annotations

import ipaddress
import re

from .errors import InvalidAddress, InvalidMac

_MAC_SEP_RE = re.compile(r"[:\-\.]")
_HEX12_RE = re.compile(r"^[0-9a-f]{12}$")


def canonical_mac(raw: str) -> str:
    """Normalize a MAC address to ``aa:bb:cc:dd:ee:ff``.

    Accepts colon, hyphen, or dot separated forms and bare 12-digit hex.
    Raises InvalidMac for anything else.
    """
    if not isinstance(raw, str):
        raise InvalidMac(f"not a MAC address: {raw!r}")
    digits = _MAC_SEP_RE.sub("", raw.strip().lower())
    if not _HEX12_RE.match(digits):
        raise InvalidMac(f"not a MAC address: {raw!r}")
    return ":".join(digits[i : i + 2] for i in range(0, 12, 2))


def is_mac(raw: str) -> bool:
    try:
        canonical_mac(raw)
        return True
    except InvalidMac:
        return False


def parse_ipv4(raw: str) -> str:
    """Validate and normalize an IPv4 address; raises InvalidAddress."""
    try:
        return str(ipaddress.IPv4Address(raw.strip()))
    except (ipaddress.AddressValueError, ValueError, AttributeError):
        raise InvalidAddress(f"not an IPv4 address: {raw!r}") from None


def is_ipv4(raw: str) -> bool:
    try:
        parse_ipv4(raw)
        return True
    except InvalidAddress:
        return False


def canonical_address(raw: str) -> str:
    """Normalize an alias member: IPv4 text or canonical MAC."""
    if is_ipv4(raw):
        return parse_ipv4(raw)
    if is_mac(raw):
        return canonical_mac(raw)
    raise InvalidAddress(f"neither IPv4 nor MAC: {raw!r}")
