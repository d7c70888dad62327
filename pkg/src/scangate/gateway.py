"""HTTP gateway: the single point of entry for clients.

Every request is authenticated against static bearer tokens, routed to
the registry/datastore/inference services, and appended to the audit
trail -- including rejected and failing requests.  Scan data crosses the
wire as NPY bytes (raw octet-stream on download, base64 inside JSON for
inline inference payloads); everything else is JSON.

Error responses always carry ``{"code", "message", "request_id"}`` where
``code`` is a machine-readable name such as ``BadMagic`` or
``NotValidated``.
"""

from __future__ import annotations

import base64
import binascii
import time
import uuid
from datetime import datetime, timezone
from typing import Any

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.middleware.base import BaseHTTPMiddleware

from . import datastore as ds
from . import inference
from . import registry as reg
from .audit import AuditLog, AuditRecord
from .config import Principal, Role, ServerConfig
from .npy_codec import NpyFormatError, decode_npy

API_PREFIX = "/api/v1"

#: JSON Schema every successful /infer response body conforms to.
INFER_RESPONSE_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model_id", "version", "rois", "params_used", "duration_ms"],
    "additionalProperties": False,
    "properties": {
        "model_id": {"type": "string"},
        "version": {"type": "integer", "minimum": 1},
        "rois": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["row", "col", "score"],
                "additionalProperties": False,
                "properties": {
                    "row": {"type": "integer", "minimum": 0},
                    "col": {"type": "integer", "minimum": 0},
                    "score": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "params_used": {"type": "object"},
        "duration_ms": {"type": "number", "minimum": 0},
    },
}


class ApiError(Exception):
    """Domain failure with an HTTP status and machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


_STATUS_BY_ERROR: tuple[tuple[type[Exception], int], ...] = (
    (reg.UnknownModel, 404),
    (reg.UnknownVersion, 404),
    (reg.UnknownDataset, 404),
    (reg.NoActiveVersion, 409),
    (reg.NotValidated, 409),
    (reg.AlreadyActive, 409),
    (reg.NothingToRollBackTo, 409),
    (reg.InvalidSchema, 422),
    (ds.UnknownDataset, 404),
    (ds.UnknownScan, 404),
    (ds.DuplicateDatasetId, 409),
    (ds.DatastoreError, 422),  # MissingManifest, BadManifest, BadScanFile, ShapeMismatch
    (inference.InferenceError, 422),
    (NpyFormatError, 422),
)

_DOMAIN_ERRORS = (reg.RegistryError, ds.DatastoreError, inference.InferenceError, NpyFormatError)


def _to_api_error(exc: Exception) -> ApiError:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return ApiError(status, type(exc).__name__, str(exc))
    return ApiError(500, type(exc).__name__, str(exc))


# -- auth ---------------------------------------------------------------------


def _authenticate(request: Request, min_role: Role) -> Principal:
    header = request.headers.get("authorization", "")
    if not header.lower().startswith("bearer "):
        raise ApiError(401, "Unauthorized", "missing bearer token")
    principal = request.app.state.principals.get(header[7:].strip())
    if principal is None:
        raise ApiError(401, "Unauthorized", "unknown token")
    request.state.principal = principal
    if principal.role < min_role:
        raise ApiError(403, "Forbidden", f"requires {min_role.label} role or above")
    return principal


def require(min_role: Role):
    def dependency(request: Request) -> Principal:
        return _authenticate(request, min_role)

    return Depends(dependency)


# -- middleware ---------------------------------------------------------------


class AuditMiddleware(BaseHTTPMiddleware):
    """Writes exactly one audit record per received request."""

    def __init__(self, app, log: AuditLog):
        super().__init__(app)
        self.log = log

    async def dispatch(self, request: Request, call_next):
        request_id = uuid.uuid4().hex
        request.state.request_id = request_id
        start = time.perf_counter()
        status = 500
        try:
            response = await call_next(request)
            status = response.status_code
        finally:
            latency_ms = (time.perf_counter() - start) * 1000.0
            principal = getattr(request.state, "principal", None)
            route = request.scope.get("route")
            template = getattr(route, "path", request.url.path)
            if status in (401, 403):
                outcome = "denied"
            elif status < 400:
                outcome = "ok"
            else:
                outcome = "error"
            self.log.append(
                AuditRecord(
                    ts=datetime.now(timezone.utc).isoformat(),
                    request_id=request_id,
                    principal=principal.name if principal else "anonymous",
                    role=principal.role.label if principal else "-",
                    action=f"{request.method} {template}",
                    resource=request.url.path,
                    outcome=outcome,
                    latency_ms=round(latency_ms, 3),
                )
            )
        response.headers["x-request-id"] = request_id
        return response


class BodySizeLimitMiddleware(BaseHTTPMiddleware):
    def __init__(self, app, max_bytes: int):
        super().__init__(app)
        self.max_bytes = max_bytes

    async def dispatch(self, request: Request, call_next):
        length = request.headers.get("content-length")
        if length and length.isdigit() and int(length) > self.max_bytes:
            return _error_response(
                request, 413, "PayloadTooLarge", f"request body exceeds {self.max_bytes} bytes"
            )
        return await call_next(request)


def _error_response(request: Request, status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={
            "code": code,
            "message": message,
            "request_id": getattr(request.state, "request_id", ""),
        },
    )


# -- request bodies -----------------------------------------------------------


class ParamSpecBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: str
    min: int | float | None = None
    max: int | float | None = None
    default: bool | int | float


class RegisterBody(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model_id: str
    display_name: str
    detector: str
    param_schema: list[ParamSpecBody]


class ValidateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset_id: str


class PromoteBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    force: bool = False


class IngestBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str


class InferDataBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    npy_base64: str | None = None
    dataset_id: str | None = None
    scan_id: str | None = None


class InferBody(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model_id: str
    params: dict[str, Any] = {}
    data: InferDataBody


# -- serialization ------------------------------------------------------------


def _descriptor_json(desc: reg.ModelDescriptor) -> dict:
    return {
        "model_id": desc.model_id,
        "version": desc.version,
        "display_name": desc.display_name,
        "detector": desc.detector,
        "param_schema": [spec.to_json() for spec in desc.param_schema],
        "state": desc.state.value,
        "validated": desc.validated,
        "created_at": desc.created_at,
        "checksum": desc.checksum,
    }


def _activation_json(record: reg.ActivationRecord) -> dict:
    return {
        "model_id": record.model_id,
        "previous_active": record.previous_active,
        "new_active": record.new_active,
        "at": record.at,
    }


def _report_json(report: reg.ValidationReport) -> dict:
    return {
        "model_id": report.model_id,
        "version": report.version,
        "dataset_id": report.dataset_id,
        "entries": [
            {"scan_id": e.scan_id, "roi_count": e.roi_count, "error": e.error}
            for e in report.entries
        ],
        "validated": report.validated,
        "at": report.at,
    }


def _outcome_json(outcome: inference.InferenceOutcome) -> dict:
    return {
        "model_id": outcome.model_id,
        "version": outcome.version,
        "rois": [{"row": r.row, "col": r.col, "score": r.score} for r in outcome.rois],
        "params_used": outcome.params_used,
        "duration_ms": outcome.duration_ms,
    }


def _manifest_json(manifest: ds.DatasetManifest) -> dict:
    return {
        "dataset_id": manifest.dataset_id,
        "name": manifest.name,
        "description": manifest.description,
        "scans": [
            {"scan_id": s.scan_id, "file": s.file, "height": s.height, "width": s.width}
            for s in manifest.scans
        ],
    }


# -- app factory --------------------------------------------------------------


def create_app(
    config: ServerConfig,
    *,
    registry: reg.Registry | None = None,
    datastore: ds.Datastore | None = None,
    audit_log: AuditLog | None = None,
) -> FastAPI:
    """Build the gateway application from a validated config.

    Raises JournalError if the registry journal cannot be replayed and
    DatastoreError if a dataset under the configured root is invalid.
    """
    if datastore is None:
        config.datasets_root.mkdir(parents=True, exist_ok=True)
        datastore = ds.Datastore(config.datasets_root)
    if registry is None:
        registry = reg.Registry(config.journal_path, scan_source=datastore)
    if audit_log is None:
        audit_log = AuditLog(config.audit_path)

    app = FastAPI(title="scangate", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.config = config
    app.state.registry = registry
    app.state.datastore = datastore
    app.state.audit = audit_log
    app.state.principals = {p.token: p for p in config.tokens}

    app.add_middleware(BodySizeLimitMiddleware, max_bytes=config.max_body_bytes)
    app.add_middleware(AuditMiddleware, log=audit_log)
    # Outermost, so the browser UI can be hosted from any static origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return _error_response(request, exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error_response(request, 422, "ValidationError", str(exc.errors()[:3]))

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_handler(request: Request, exc: StarletteHTTPException):
        code = {404: "NotFound", 405: "MethodNotAllowed"}.get(exc.status_code, "HttpError")
        return _error_response(request, exc.status_code, code, str(exc.detail))

    # -- read plane (viewer and above) ---------------------------------------

    @app.get(API_PREFIX + "/models")
    def list_models(
        request: Request,
        include_retired: bool = False,
        principal: Principal = require(Role.VIEWER),
    ):
        models = request.app.state.registry.list_models(include_retired=include_retired)
        return [_descriptor_json(d) for d in models]

    @app.get(API_PREFIX + "/datasets")
    def list_datasets(request: Request, principal: Principal = require(Role.VIEWER)):
        return [
            {
                "dataset_id": s.dataset_id,
                "name": s.name,
                "description": s.description,
                "scan_count": s.scan_count,
            }
            for s in request.app.state.datastore.list_datasets()
        ]

    @app.get(API_PREFIX + "/datasets/{dataset_id}")
    def get_dataset(
        request: Request, dataset_id: str, principal: Principal = require(Role.VIEWER)
    ):
        try:
            return _manifest_json(request.app.state.datastore.get_manifest(dataset_id))
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc

    @app.get(API_PREFIX + "/datasets/{dataset_id}/scans/{scan_id}")
    def get_scan(
        request: Request,
        dataset_id: str,
        scan_id: str,
        principal: Principal = require(Role.VIEWER),
    ):
        try:
            blob = request.app.state.datastore.get_scan_bytes(dataset_id, scan_id)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return Response(content=blob, media_type="application/octet-stream")

    # -- inference plane (inspector and above) -------------------------------

    @app.post(API_PREFIX + "/infer")
    def infer(request: Request, body: InferBody, principal: Principal = require(Role.INSPECTOR)):
        inline = body.data.npy_base64 is not None
        referenced = body.data.dataset_id is not None or body.data.scan_id is not None
        if inline == referenced:
            raise ApiError(
                422,
                "InvalidRequest",
                "data must carry exactly one of npy_base64 or (dataset_id, scan_id)",
            )
        if referenced and (body.data.dataset_id is None or body.data.scan_id is None):
            raise ApiError(422, "InvalidRequest", "both dataset_id and scan_id are required")
        try:
            # Pin the Active version now; a promotion landing mid-request
            # must not change what this request reports or runs.
            _, desc = request.app.state.registry.resolve_active(body.model_id)
            if inline:
                try:
                    blob = base64.b64decode(body.data.npy_base64, validate=True)
                except binascii.Error as exc:
                    raise ApiError(422, "InvalidRequest", f"invalid base64 payload: {exc}") from exc
                scan = decode_npy(blob)
            else:
                scan = request.app.state.datastore.get_scan(
                    body.data.dataset_id, body.data.scan_id
                )
            outcome = inference.run_inference(desc, scan, body.params)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _outcome_json(outcome)

    # -- management plane (admin only) ---------------------------------------

    @app.post(API_PREFIX + "/models")
    def register_model(
        request: Request, body: RegisterBody, principal: Principal = require(Role.ADMIN)
    ):
        schema = [
            reg.ParamSpec(p.name, p.kind, p.min, p.max, p.default) for p in body.param_schema
        ]
        try:
            desc = request.app.state.registry.register_model(
                body.model_id, body.display_name, body.detector, schema
            )
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _descriptor_json(desc)

    @app.post(API_PREFIX + "/models/{model_id}/versions/{version}/validate")
    def validate_version(
        request: Request,
        model_id: str,
        version: int,
        body: ValidateBody,
        principal: Principal = require(Role.ADMIN),
    ):
        try:
            report = request.app.state.registry.validate(model_id, version, body.dataset_id)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _report_json(report)

    @app.post(API_PREFIX + "/models/{model_id}/versions/{version}/promote")
    def promote_version(
        request: Request,
        model_id: str,
        version: int,
        body: PromoteBody | None = None,
        principal: Principal = require(Role.ADMIN),
    ):
        force = body.force if body is not None else False
        try:
            record = request.app.state.registry.promote(model_id, version, force=force)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _activation_json(record)

    @app.post(API_PREFIX + "/models/{model_id}/rollback")
    def rollback_model(
        request: Request, model_id: str, principal: Principal = require(Role.ADMIN)
    ):
        try:
            record = request.app.state.registry.rollback(model_id)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _activation_json(record)

    @app.post(API_PREFIX + "/datasets")
    def ingest_dataset(
        request: Request, body: IngestBody, principal: Principal = require(Role.ADMIN)
    ):
        try:
            manifest = request.app.state.datastore.ingest(body.dir)
        except _DOMAIN_ERRORS as exc:
            raise _to_api_error(exc) from exc
        return _manifest_json(manifest)

    @app.get(API_PREFIX + "/audit")
    def audit_tail(
        request: Request,
        limit: int = Query(100, ge=0),
        principal: Principal = require(Role.ADMIN),
    ):
        records = request.app.state.audit.recent(min(limit, 1000))
        return [r.to_json() for r in records]

    return app
