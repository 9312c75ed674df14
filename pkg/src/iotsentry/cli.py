"""Operator command line: run the service, execute scenarios, drive admin actions.

Exit statuses are scriptable: 0 ok, 2 usage, 3 auth, 4 not found,
5 conflict, 6 unavailable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import httpx

from .config import (
    ENV_PREFIX,
    ClientConfig,
    load_client_config,
    load_scenario_config,
    load_serve_config,
)
from .errors import ApiError, ConfigMissing, ScenarioFailed, SentryError
from .harness import render_report, run_scenario
from .storage import Storage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_AUTH = 3
EXIT_NOT_FOUND = 4
EXIT_CONFLICT = 5
EXIT_UNAVAILABLE = 6

_EXIT_BY_STATUS = {401: EXIT_AUTH, 403: EXIT_AUTH, 404: EXIT_NOT_FOUND, 409: EXIT_CONFLICT, 422: EXIT_USAGE, 503: EXIT_UNAVAILABLE}


class ApiClient:
    def __init__(self, config: ClientConfig):
        self.config = config
        headers = {}
        token = config.token
        if token is None:
            token = self._login()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(base_url=config.endpoint, headers=headers, timeout=10.0)

    def _login(self) -> str | None:
        username = os.environ.get(ENV_PREFIX + "USERNAME")
        password = os.environ.get(ENV_PREFIX + "PASSWORD")
        if not username:
            return None
        try:
            response = httpx.post(
                self.config.endpoint + "/auth/token",
                json={"username": username, "password": password or ""},
                timeout=10.0,
            )
        except httpx.HTTPError as exc:
            raise ApiError(503, "unavailable", f"cannot reach API: {exc}") from None
        if response.status_code != 200:
            body = _safe_json(response)
            raise ApiError(response.status_code, body.get("code", "auth"), body.get("message", "login failed"))
        return response.json()["token"]

    def request(self, method: str, path: str, json_body: dict | None = None, params: dict | None = None) -> dict:
        try:
            response = self._client.request(method, path, json=json_body, params=params)
        except httpx.HTTPError as exc:
            raise ApiError(503, "unavailable", f"cannot reach API: {exc}") from None
        if response.status_code >= 400:
            body = _safe_json(response)
            raise ApiError(
                response.status_code,
                body.get("code", "api_error"),
                body.get("message", response.text),
            )
        return response.json()


def _safe_json(response) -> dict:
    try:
        return response.json()
    except ValueError:
        return {}


def _render_table(rows: list[dict], columns: list[str]) -> str:
    if not rows:
        return "  ".join(columns)
    widths = [max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in columns]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(str(r.get(c, "")).ljust(w) for c, w in zip(columns, widths)).rstrip())
    return "\n".join(lines)


def _emit(rows: list[dict], columns: list[str], fmt: str) -> None:
    if fmt == "records":
        for r in rows:
            print(json.dumps(r))
    else:
        print(_render_table(rows, columns))


# -- verb handlers -----------------------------------------------------------


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceRuntime, create_app

    serve_config = load_serve_config(args.config)
    runtime = ServiceRuntime(serve_config.settings)
    runtime.start_background()
    app = create_app(runtime)
    host = args.host or serve_config.host
    port = args.port if args.port is not None else serve_config.port
    print(f"iotsentry API on http://{host}:{port}")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        runtime.stop()
    return EXIT_OK


def _cmd_scenario(args) -> int:
    config = load_scenario_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.repetitions is not None:
        config.repetitions = args.repetitions
    config.validate()
    try:
        report = run_scenario(config)
    except ScenarioFailed as exc:
        print(f"scenario failed in phase {exc.phase}: {exc.message}", file=sys.stderr)
        if exc.partial_report is not None and exc.partial_report.repetitions:
            print(render_report(exc.partial_report, args.format), file=sys.stderr)
        return 1
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def _client(args) -> ApiClient:
    return ApiClient(load_client_config(args.config))


DEVICE_COLUMNS = ["device_id", "mac", "ip", "state", "owner_id", "name", "pending_op"]
INCIDENT_COLUMNS = ["incident_id", "severity", "note", "src_ip", "device_id", "status", "ts"]


def _cmd_devices(args) -> int:
    body = _client(args).request("GET", "/devices")
    _emit(body["devices"], DEVICE_COLUMNS, args.format)
    return EXIT_OK


def _cmd_approve(args) -> int:
    body = _client(args).request("POST", f"/devices/{args.device}/approve", {"ip": args.ip})
    _emit([body], DEVICE_COLUMNS, args.format)
    return EXIT_OK


def _cmd_block(args) -> int:
    body = _client(args).request("POST", f"/devices/{args.device}/block", {"reason": args.reason})
    _emit([body], DEVICE_COLUMNS + ["feedback_id"], args.format)
    return EXIT_OK


def _cmd_unblock(args) -> int:
    body = _client(args).request("POST", f"/devices/{args.device}/unblock")
    _emit([body], DEVICE_COLUMNS, args.format)
    return EXIT_OK


def _cmd_incidents(args) -> int:
    params = {}
    if args.severity:
        params["severity"] = args.severity
    if args.status:
        params["status"] = args.status
    if args.cursor:
        params["cursor"] = args.cursor
    body = _client(args).request("GET", "/incidents", params=params)
    _emit(body["incidents"], INCIDENT_COLUMNS, args.format)
    if body.get("cursor") and args.format == "table":
        print(f"cursor: {body['cursor']}")
    return EXIT_OK


def _cmd_sync(args) -> int:
    payload = {"institution_id": args.institution} if args.institution else None
    body = _client(args).request("POST", "/firewall/sync", payload)
    print(json.dumps(body, indent=2))
    return EXIT_OK


def _cmd_export(args) -> int:
    serve_config = load_serve_config(args.config)
    storage_path = serve_config.settings.storage_path
    if not storage_path:
        raise ConfigMissing("service config has no storage_path to export from")
    storage = Storage(storage_path)
    try:
        written = storage.export(args.out)
    finally:
        storage.close()
    for path in written:
        print(path)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotsentry", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, client: bool = True):
        p.add_argument("--config", default=None, help="configuration file")
        if client:
            p.add_argument("--format", choices=["table", "records"], default="table")

    p = sub.add_parser("serve", help="run the API, ingest, and response pipeline")
    common(p, client=False)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("scenario", help="run the detect-and-block scenario harness")
    common(p, client=False)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--format", choices=["table", "records"], default="table")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("devices", help="list devices visible to the caller")
    common(p)

    p = sub.add_parser("approve", help="approve a pending device")
    common(p)
    p.add_argument("--device", required=True)
    p.add_argument("--ip", default=None)

    p = sub.add_parser("block", help="block an active device")
    common(p)
    p.add_argument("--device", required=True)
    p.add_argument("--reason", default="")

    p = sub.add_parser("unblock", help="unblock a blocked device")
    common(p)
    p.add_argument("--device", required=True)

    p = sub.add_parser("incidents", help="list incidents")
    common(p)
    p.add_argument("--severity", default=None)
    p.add_argument("--status", default=None)
    p.add_argument("--cursor", default=None)

    p = sub.add_parser("sync", help="trigger firewall reconciliation")
    common(p)
    p.add_argument("--institution", default=None)

    p = sub.add_parser("export", help="export all stores as line-delimited records")
    common(p, client=False)
    p.add_argument("--out", required=True, help="directory for the export files")

    return parser


_HANDLERS = {
    "serve": _cmd_serve,
    "scenario": _cmd_scenario,
    "devices": _cmd_devices,
    "approve": _cmd_approve,
    "block": _cmd_block,
    "unblock": _cmd_unblock,
    "incidents": _cmd_incidents,
    "sync": _cmd_sync,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get(ENV_PREFIX + "LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.verb](args)
    except ApiError as exc:
        print(f"error ({exc.code}): {exc.message}", file=sys.stderr)
        return _EXIT_BY_STATUS.get(exc.status, 1)
    except ConfigMissing as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except SentryError as exc:
        print(f"error ({exc.code}): {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
