"""HTTP surface: authentication, devices, firewall, and incidents routers.

Every route authenticates a bearer token, enforces the authorization
predicate against the caller's institution scope, and returns errors as
``{code, message, detail}`` with stable machine-readable codes. Responses
never contain resources outside the principal's scope.
"""

from __future__ import annotations

import logging
from typing import Optional

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.security.utils import get_authorization_scheme_param
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..clock import now
from ..domain import Device, Principal, ResourceRef, Role, authorize
from ..errors import (
    AliasNotFound,
    BadCredentials,
    CommitRejected,
    DeviceNotFound,
    DuplicateMac,
    FieldAlreadySet,
    FirewallUnreachable,
    IllegalTransition,
    InvalidAddress,
    InvalidMac,
    IpCollision,
    MonotonicityViolation,
    NoFreeAddress,
    SchemaViolation,
    SentryError,
    SourceUnavailable,
    StorageUnavailable,
    TokenExpired,
    TokenInvalid,
    Unauthorized,
    UnknownStore,
)
from ..records import AuditEntry, IncidentStatus
from ..severity import Severity
from .runtime import ServiceRuntime

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR = {
    BadCredentials: 401,
    TokenExpired: 401,
    TokenInvalid: 401,
    Unauthorized: 403,
    DeviceNotFound: 404,
    AliasNotFound: 404,
    UnknownStore: 404,
    DuplicateMac: 409,
    IpCollision: 409,
    IllegalTransition: 409,
    CommitRejected: 409,
    FieldAlreadySet: 409,
    MonotonicityViolation: 409,
    NoFreeAddress: 409,
    InvalidMac: 422,
    InvalidAddress: 422,
    SchemaViolation: 422,
    FirewallUnreachable: 503,
    StorageUnavailable: 503,
    SourceUnavailable: 503,
}


class TokenRequest(BaseModel):
    username: str
    password: str


class DeviceRequest(BaseModel):
    mac: str
    name: str = ""
    requested_ip: Optional[str] = None
    institution_id: Optional[str] = None


class ApproveRequest(BaseModel):
    ip: Optional[str] = None


class BlockRequest(BaseModel):
    reason: str = ""


class SyncRequest(BaseModel):
    institution_id: Optional[str] = None


def device_doc(device: Device) -> dict:
    return {
        "device_id": device.device_id,
        "mac": device.mac,
        "ip": device.ip,
        "owner_id": device.owner_id,
        "institution_id": device.institution_id,
        "state": device.state.value,
        "name": device.name,
        "pending_op": device.pending_op,
        "created_at": device.created_at,
        "updated_at": device.updated_at,
    }


def incident_doc(record) -> dict:
    return {
        "incident_id": record.incident_id,
        "ts": record.ts,
        "src_ip": record.src_ip,
        "dst_ip": record.dst_ip,
        "uid": record.uid,
        "note": record.note,
        "msg": record.msg,
        "severity": record.severity.name.lower(),
        "device_id": record.device_id,
        "institution_id": record.institution_id,
        "status": record.status.value,
        "created_at": record.created_at,
    }


def feedback_doc(row) -> dict:
    return {
        "feedback_id": row.feedback_id,
        "device_id": row.device_id,
        "incident_id": row.incident_id,
        "t_attack_start": row.t_attack_start,
        "t_notice": row.t_notice,
        "t_decision": row.t_decision,
        "t_commit": row.t_commit,
        "t_loss_of_access": row.t_loss_of_access,
        "unblocked_at": row.unblocked_at,
    }


def create_app(runtime: ServiceRuntime) -> FastAPI:
    app = FastAPI(title="iotsentry", docs_url=None, redoc_url=None)
    app.state.runtime = runtime
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    # -- error shaping -------------------------------------------------------

    @app.exception_handler(SentryError)
    async def sentry_error_handler(request: Request, exc: SentryError):
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "schema_violation", "message": "request body failed validation", "detail": exc.errors()},
        )

    @app.exception_handler(StarletteHTTPException)
    async def http_handler(request: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": "not_found" if exc.status_code == 404 else "http_error", "message": str(exc.detail), "detail": {}},
        )

    # -- auditing: one entry per 2xx mutating response --------------------------

    @app.middleware("http")
    async def audit_middleware(request: Request, call_next):
        response = await call_next(request)
        if request.method != "GET" and 200 <= response.status_code < 300:
            actor = getattr(request.state, "audit_actor", "anonymous")
            try:
                runtime.storage.put(
                    "audit_log",
                    AuditEntry(
                        entry_id=runtime.storage.new_id(),
                        ts=now(),
                        origin="api",
                        actor=actor,
                        action=f"{request.method} {request.url.path}",
                        subject=request.url.path.rsplit("/", 1)[-1],
                        detail=f"status={response.status_code}",
                    ),
                )
            except StorageUnavailable:
                logger.warning("audit entry dropped: storage unavailable")
        return response

    # -- authentication ------------------------------------------------------------

    def principal(request: Request) -> Principal:
        header = request.headers.get("Authorization") or ""
        scheme, token = get_authorization_scheme_param(header)
        if not token or scheme.lower() != "bearer":
            raise TokenInvalid("missing bearer token")
        actor = runtime.issuer.validate(token)
        request.state.audit_actor = actor.subject
        return actor

    def check(actor: Principal, action: str, ref: ResourceRef) -> None:
        if not authorize(actor, action, ref):
            raise Unauthorized(f"{actor.role.value} {actor.subject!r} denied {action}")

    def device_ref(device: Device) -> ResourceRef:
        return ResourceRef("device", institution_id=device.institution_id, owner_id=device.owner_id)

    # -- auth router ------------------------------------------------------------------

    @app.post("/auth/token")
    def issue_token(body: TokenRequest, request: Request):
        account = runtime.users.verify(body.username, body.password)
        token = runtime.issuer.issue_for(account)
        request.state.audit_actor = account.username
        return {
            "token": token.text,
            "subject": token.subject,
            "role": token.role.value,
            "institutions": sorted(token.institutions),
            "expires_at": token.expires_at,
        }

    # -- devices router -----------------------------------------------------------------

    @app.get("/devices")
    def list_devices(actor: Principal = Depends(principal)):
        docs = []
        for device in runtime.registry.devices():
            if authorize(actor, "read_device", device_ref(device)):
                docs.append(device_doc(device))
        return {"devices": docs}

    @app.get("/devices/{device_id}")
    def get_device(device_id: str, actor: Principal = Depends(principal)):
        device = runtime.registry.require_device(device_id)
        check(actor, "read_device", device_ref(device))
        return device_doc(device)

    @app.post("/devices", status_code=201)
    def request_device(body: DeviceRequest, actor: Principal = Depends(principal)):
        institution = body.institution_id or actor.institution
        check(actor, "write_device", ResourceRef("device", institution_id=institution, owner_id=actor.subject))
        device = runtime.registry.request_access(
            actor, body.mac, body.name, institution_id=institution, requested_ip=body.requested_ip
        )
        return device_doc(device)

    @app.post("/devices/{device_id}/approve")
    def approve(device_id: str, body: ApproveRequest, actor: Principal = Depends(principal)):
        device = runtime.registry.require_device(device_id)
        check(actor, "approve", device_ref(device))
        return device_doc(runtime.registry.approve_device(actor, device_id, assigned_ip=body.ip))

    @app.post("/devices/{device_id}/block")
    def block(device_id: str, body: BlockRequest, actor: Principal = Depends(principal)):
        device = runtime.registry.require_device(device_id)
        check(actor, "block", device_ref(device))
        blocked, feedback_id = runtime.registry.block_device(actor, device_id, reason=body.reason)
        doc = device_doc(blocked)
        doc["feedback_id"] = feedback_id
        return doc

    @app.post("/devices/{device_id}/unblock")
    def unblock(device_id: str, actor: Principal = Depends(principal)):
        device = runtime.registry.require_device(device_id)
        check(actor, "unblock", device_ref(device))
        return device_doc(runtime.registry.unblock_device(actor, device_id))

    # -- incidents router ------------------------------------------------------------------

    def incident_in_scope(actor: Principal, record) -> bool:
        if actor.role is Role.SUPERUSER:
            return record.institution_id is None or record.institution_id in actor.institutions
        return record.institution_id is not None and record.institution_id in actor.institutions

    @app.get("/incidents")
    def incidents(
        severity: Optional[str] = None,
        status: Optional[str] = None,
        cursor: Optional[str] = None,
        limit: int = 200,
        actor: Principal = Depends(principal),
    ):
        check(actor, "read_incidents", ResourceRef("incident", institution_id=next(iter(actor.institutions), None)))
        try:
            want_severity = Severity.parse(severity) if severity else None
            want_status = IncidentStatus(status.capitalize()) if status else None
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from None

        def matches(record) -> bool:
            if not incident_in_scope(actor, record):
                return False
            if want_severity is not None and record.severity is not want_severity:
                return False
            if want_status is not None and record.status is not want_status:
                return False
            return True

        records, next_cursor = runtime.storage.page("zeek_incidents", matches, after=cursor, limit=limit)
        return {"incidents": [incident_doc(r) for r in records], "cursor": next_cursor}

    # -- feedback (blocking history) ------------------------------------------------------

    @app.get("/feedback")
    def feedback(actor: Principal = Depends(principal)):
        check(actor, "read_incidents", ResourceRef("incident", institution_id=next(iter(actor.institutions), None)))
        rows = []
        for row in runtime.storage.query("blocking_feedback_history"):
            device = runtime.registry.device(row.device_id)
            institution = device.institution_id if device else None
            if authorize(actor, "read_incidents", ResourceRef("incident", institution_id=institution)):
                rows.append(feedback_doc(row))
        return {"feedback": rows}

    # -- firewall router ---------------------------------------------------------------------

    def named_institution(actor: Principal, institution_id: Optional[str]) -> str:
        inst = institution_id or (
            actor.institution if actor.role is not Role.SUPERUSER else runtime.default_institution()
        )
        check(actor, "manage_firewall", ResourceRef("firewall", institution_id=inst))
        if inst not in runtime.firewalls:
            raise DeviceNotFound(f"unknown institution {inst}")
        return inst

    @app.get("/firewall/state")
    def firewall_state(institution_id: Optional[str] = None, actor: Principal = Depends(principal)):
        inst = named_institution(actor, institution_id)
        return runtime.firewall_state_doc(inst)

    @app.post("/firewall/sync")
    def firewall_sync(body: Optional[SyncRequest] = None, actor: Principal = Depends(principal)):
        inst = named_institution(actor, body.institution_id if body else None)
        plan = runtime.sync_firewall(inst)
        return {"institution_id": inst, "plan": plan.summary()}

    @app.get("/firewall/conflicts")
    def firewall_conflicts(institution_id: Optional[str] = None, actor: Principal = Depends(principal)):
        inst = named_institution(actor, institution_id)
        plan = runtime.last_sync.get(inst)
        conflicts = plan.summary()["conflicts"] if plan else []
        return {"institution_id": inst, "conflicts": conflicts}

    return app
