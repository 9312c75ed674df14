"""HTTP client for the firewall REST surface.

Speaks the same contract as :class:`SimulatedFirewall`; the conformance
suite runs against both so the orchestrator can swap the wire client in for
a real appliance endpoint without behavioral drift.
"""

from __future__ import annotations

import httpx

from ..errors import (
    AliasNotFound,
    CommitRejected,
    FirewallUnreachable,
    InvalidAddress,
    IpCollision,
    SentryError,
)
from .model import Alias, CommitReceipt, DhcpStaticMapping, FilterRule, FirewallState
from .server import API_PREFIX

_ERRORS_BY_CODE = {
    AliasNotFound.code: AliasNotFound,
    InvalidAddress.code: InvalidAddress,
    IpCollision.code: IpCollision,
    CommitRejected.code: CommitRejected,
    FirewallUnreachable.code: FirewallUnreachable,
}


def doc_to_state(doc: dict) -> FirewallState:
    return FirewallState(
        aliases={
            a["name"]: Alias(a["name"], set(a.get("address") or []), a.get("type", "host"), a.get("descr", ""))
            for a in doc.get("aliases", [])
        },
        rules=[
            FilterRule(
                r["id"], r["action"], r["source_alias"], r.get("interface", "lan"), r.get("position", 0)
            )
            for r in doc.get("rules", [])
        ],
        mappings={
            m["mac"]: DhcpStaticMapping(m["mac"], m["ipaddr"], m.get("hostname"))
            for m in doc.get("mappings", [])
        },
        generation=doc.get("generation", 0),
    )


class WireFirewallClient:
    """Token-authenticated client bound to one firewall endpoint."""

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 5.0):
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(base_url=base_url + API_PREFIX, headers=headers, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    # -- plumbing ------------------------------------------------------------

    def _request(self, method: str, path: str, json_body: dict | None = None, params: dict | None = None) -> dict:
        try:
            response = self._client.request(method, path, json=json_body, params=params)
        except httpx.HTTPError as exc:
            raise FirewallUnreachable(f"firewall endpoint unreachable: {exc}") from None
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {}
            code = payload.get("code", "")
            message = payload.get("message", response.text)
            exc_type = _ERRORS_BY_CODE.get(code)
            if exc_type is not None:
                raise exc_type(message)
            raise SentryError(f"firewall endpoint returned {response.status_code}: {message}")
        return response.json()

    @staticmethod
    def _alias(doc: dict) -> Alias:
        return Alias(doc["name"], set(doc.get("address") or []), doc.get("type", "host"), doc.get("descr", ""))

    # -- contract operations -----------------------------------------------------

    def get_alias_by_name(self, name: str) -> Alias:
        return self._alias(self._request("GET", f"/firewall/alias/{name}"))

    def add_addresses_to_alias(self, name: str, addrs: set[str]) -> Alias:
        return self._alias(
            self._request("POST", f"/firewall/alias/{name}/address", {"address": sorted(addrs)})
        )

    def remove_addresses_from_alias(self, name: str, addrs: set[str]) -> Alias:
        return self._alias(
            self._request("DELETE", f"/firewall/alias/{name}/address", {"address": sorted(addrs)})
        )

    def upsert_dhcp_mapping(self, mac: str, ip: str, hostname: str | None = None) -> DhcpStaticMapping:
        doc = self._request(
            "POST", "/services/dhcpd/static_mapping", {"mac": mac, "ipaddr": ip, "hostname": hostname}
        )
        return DhcpStaticMapping(doc["mac"], doc["ipaddr"], doc.get("hostname"))

    def delete_dhcp_mapping(self, mac: str) -> None:
        self._request("DELETE", f"/services/dhcpd/static_mapping/{mac}")

    def apply_changes(self) -> CommitReceipt:
        doc = self._request("POST", "/firewall/apply")
        return CommitReceipt(doc["generation"], doc["applied_at"], doc.get("noop", False))

    def get_state(self, committed: bool = False) -> FirewallState:
        doc = self._request("GET", "/firewall/state", params={"view": "committed" if committed else "config"})
        return doc_to_state(doc)

    def evaluate_packet(self, src: str, dst: str | None = None) -> str:
        doc = self._request("GET", "/diagnostics/verdict", params={"src": src, "dst": dst or ""})
        return doc["verdict"]
