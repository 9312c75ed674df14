"""Local HTTP endpoint exposing a simulated firewall over the wire surface.

Serves the same REST contract the wire client speaks against a real
appliance: alias read/update, DHCP static-mapping upsert, and the apply
endpoint that activates staged changes. Used by the conformance suite and
available to the harness as a probe target.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..errors import (
    AliasNotFound,
    CommitRejected,
    FirewallUnreachable,
    InvalidAddress,
    IpCollision,
    SentryError,
)
from .model import FirewallState
from .sim import SimulatedFirewall

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"

_STATUS_BY_CODE = {
    AliasNotFound.code: 404,
    InvalidAddress.code: 400,
    IpCollision.code: 409,
    CommitRejected.code: 409,
    FirewallUnreachable.code: 503,
}


def state_to_doc(state: FirewallState) -> dict:
    return {
        "generation": state.generation,
        "aliases": [
            {"name": a.name, "type": a.kind, "address": sorted(a.addresses), "descr": a.description}
            for a in state.aliases.values()
        ],
        "rules": [
            {
                "id": r.rule_id,
                "action": r.action,
                "source_alias": r.source_alias,
                "interface": r.interface,
                "position": r.position,
            }
            for r in state.rules
        ],
        "mappings": [
            {"mac": m.mac, "ipaddr": m.ip, "hostname": m.hostname} for m in state.mappings.values()
        ],
    }


class _Handler(BaseHTTPRequestHandler):
    server_version = "iot-fw-sim/0.1"
    fw: SimulatedFirewall
    token: str | None

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("fw-http %s", fmt % args)

    # -- plumbing ----------------------------------------------------------

    def _send(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, code: str, message: str) -> None:
        self._send(status, {"code": code, "message": message})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            return {}

    def _authorized(self) -> bool:
        if self.token is None:
            return True
        header = self.headers.get("Authorization") or ""
        return header == f"Bearer {self.token}"

    def _alias_doc(self, alias) -> dict:
        return {
            "name": alias.name,
            "type": alias.kind,
            "address": sorted(alias.addresses),
            "descr": alias.description,
        }

    def _dispatch(self, method: str) -> None:
        if not self._authorized():
            self._error(401, "unauthorized", "missing or bad bearer token")
            return
        parsed = urlparse(self.path)
        path = parsed.path
        try:
            self._route(method, path, parse_qs(parsed.query))
        except SentryError as exc:
            self._error(_STATUS_BY_CODE.get(exc.code, 500), exc.code, exc.message)
        except Exception as exc:  # never tear the socket down on a bug
            logger.exception("firewall endpoint error")
            self._error(500, "internal", str(exc))

    def _route(self, method: str, path: str, query: dict) -> None:
        fw = self.fw
        m = re.fullmatch(API_PREFIX + r"/firewall/alias/([^/]+)", path)
        if m and method == "GET":
            self._send(200, self._alias_doc(fw.get_alias_by_name(m.group(1))))
            return
        m = re.fullmatch(API_PREFIX + r"/firewall/alias/([^/]+)/address", path)
        if m and method in ("POST", "DELETE"):
            addrs = set(self._body().get("address") or [])
            if method == "POST":
                alias = fw.add_addresses_to_alias(m.group(1), addrs)
            else:
                alias = fw.remove_addresses_from_alias(m.group(1), addrs)
            self._send(200, self._alias_doc(alias))
            return
        if path == API_PREFIX + "/services/dhcpd/static_mapping" and method == "POST":
            body = self._body()
            mapping = fw.upsert_dhcp_mapping(body.get("mac", ""), body.get("ipaddr", ""), body.get("hostname"))
            self._send(200, {"mac": mapping.mac, "ipaddr": mapping.ip, "hostname": mapping.hostname})
            return
        m = re.fullmatch(API_PREFIX + r"/services/dhcpd/static_mapping/([^/]+)", path)
        if m and method == "DELETE":
            fw.delete_dhcp_mapping(m.group(1))
            self._send(200, {"deleted": m.group(1)})
            return
        if path == API_PREFIX + "/firewall/apply" and method == "POST":
            receipt = fw.apply_changes()
            self._send(
                200, {"generation": receipt.generation, "applied_at": receipt.applied_at, "noop": receipt.noop}
            )
            return
        if path == API_PREFIX + "/firewall/state" and method == "GET":
            committed = query.get("view", ["config"])[0] == "committed"
            self._send(200, state_to_doc(fw.get_state(committed=committed)))
            return
        if path == API_PREFIX + "/diagnostics/verdict" and method == "GET":
            src = query.get("src", [""])[0]
            dst = query.get("dst", [""])[0] or None
            self._send(200, {"verdict": fw.evaluate_packet(src, dst)})
            return
        if path == API_PREFIX + "/test/outage" and method == "POST":
            fw.set_offline(bool(self._body().get("offline")))
            self._send(200, {"offline": self.fw._offline})
            return
        self._error(404, "not_found", f"no route {method} {path}")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")


class FirewallHttpServer:
    """Threaded HTTP wrapper around a SimulatedFirewall."""

    def __init__(self, fw: SimulatedFirewall | None = None, host: str = "127.0.0.1", port: int = 0, token: str | None = None):
        self.fw = fw or SimulatedFirewall()
        handler = type("BoundHandler", (_Handler,), {"fw": self.fw, "token": token})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "FirewallHttpServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, name="fw-http", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        self.stop()
        return False
