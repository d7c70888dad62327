"""Operator command line.

``scangate serve`` runs the gateway; everything else is a thin HTTP
client over the management endpoints, so the server stays the single
point of entry to registry and datastore state.  All output is
line-oriented JSON.  Exit codes: 0 for HTTP 2xx (or a clean serve
shutdown), 2 for any other HTTP status, 3 when the server is
unreachable, 1 for bad configuration.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx
import uvicorn

from .config import ConfigError, load_config
from .datastore import DatastoreError
from .gateway import create_app
from .registry import JournalError

EXIT_HTTP_ERROR = 2
EXIT_UNREACHABLE = 3


@click.group()
@click.option("--server-url", default="http://127.0.0.1:8080", show_default=True,
              envvar="SCANGATE_URL", help="Gateway base URL.")
@click.option("--token", default=None, envvar="SCANGATE_TOKEN", help="Bearer token.")
@click.pass_context
def main(ctx: click.Context, server_url: str, token: str | None):
    """Model-serving gateway for inspection scans."""
    ctx.obj = {"server_url": server_url.rstrip("/"), "token": token}


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Server config JSON.")
def serve(config_path: str):
    """Run the gateway server until interrupted."""
    try:
        cfg = load_config(config_path)
        app = create_app(cfg)
    except (ConfigError, JournalError, DatastoreError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        sys.exit(1)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


def _emit(obj) -> None:
    click.echo(json.dumps(obj, separators=(",", ":")))


def _call(ctx: click.Context, method: str, path: str, body: dict | None = None) -> None:
    """Issue one request, print the JSON result line(s), map the exit code."""
    base = ctx.obj["server_url"]
    headers = {}
    if ctx.obj["token"]:
        headers["Authorization"] = f"Bearer {ctx.obj['token']}"
    try:
        response = httpx.request(method, base + path, json=body, headers=headers, timeout=60.0)
    except httpx.HTTPError as exc:
        _emit({"error": "unreachable", "message": f"{type(exc).__name__}: {exc}"})
        sys.exit(EXIT_UNREACHABLE)
    try:
        payload = response.json()
    except ValueError:
        payload = {"raw": response.text}
    if isinstance(payload, list):
        for item in payload:
            _emit(item)
    else:
        _emit(payload)
    if not response.is_success:
        sys.exit(EXIT_HTTP_ERROR)


@main.group()
def model():
    """Model lifecycle commands (admin token required)."""


@model.command("register")
@click.option("--model-id", required=True)
@click.option("--display-name", required=True)
@click.option("--detector", required=True,
              type=click.Choice(["threshold", "zscore", "local_contrast"]))
@click.option("--schema", "schema_json", default=None,
              help="Parameter schema as a JSON array.")
@click.option("--schema-file", type=click.Path(exists=True), default=None,
              help="Read the parameter schema from a JSON file.")
@click.pass_context
def model_register(ctx, model_id, display_name, detector, schema_json, schema_file):
    """Register a new Staged model version."""
    if schema_json and schema_file:
        raise click.UsageError("use either --schema or --schema-file, not both")
    raw = schema_json if schema_json else (Path(schema_file).read_text() if schema_file else "[]")
    try:
        schema = json.loads(raw)
    except ValueError as exc:
        raise click.UsageError(f"schema is not valid JSON: {exc}")
    _call(ctx, "POST", "/api/v1/models", {
        "model_id": model_id,
        "display_name": display_name,
        "detector": detector,
        "param_schema": schema,
    })


@model.command("validate")
@click.argument("model_id")
@click.argument("version", type=int)
@click.option("--dataset-id", required=True)
@click.pass_context
def model_validate(ctx, model_id, version, dataset_id):
    """Validate a Staged version against a dataset."""
    _call(ctx, "POST", f"/api/v1/models/{model_id}/versions/{version}/validate",
          {"dataset_id": dataset_id})


@model.command("promote")
@click.argument("model_id")
@click.argument("version", type=int)
@click.option("--force", is_flag=True, help="Promote even if not validated.")
@click.pass_context
def model_promote(ctx, model_id, version, force):
    """Make a Staged version Active (atomic swap)."""
    _call(ctx, "POST", f"/api/v1/models/{model_id}/versions/{version}/promote",
          {"force": force})


@model.command("rollback")
@click.argument("model_id")
@click.pass_context
def model_rollback(ctx, model_id):
    """Re-activate the most recently retired version."""
    _call(ctx, "POST", f"/api/v1/models/{model_id}/rollback")


@model.command("list")
@click.option("--include-retired", is_flag=True)
@click.pass_context
def model_list(ctx, include_retired):
    """List model versions, one JSON line each."""
    suffix = "?include_retired=true" if include_retired else ""
    _call(ctx, "GET", "/api/v1/models" + suffix)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.pass_context
def ingest(ctx, directory):
    """Register the dataset stored in DIRECTORY (server-side path)."""
    _call(ctx, "POST", "/api/v1/datasets", {"dir": str(Path(directory).resolve())})


@main.group()
def audit():
    """Audit trail commands (admin token required)."""


@audit.command("tail")
@click.option("--limit", default=50, show_default=True, type=int)
@click.pass_context
def audit_tail(ctx, limit):
    """Print the newest audit records, one JSON line each."""
    _call(ctx, "GET", f"/api/v1/audit?limit={limit}")


if __name__ == "__main__":
    main()
