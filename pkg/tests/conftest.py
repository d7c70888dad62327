"""Shared fixtures: configs, datasets on disk, and a live uvicorn server."""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
import uvicorn
from fastapi.testclient import TestClient

from scangate.config import ServerConfig, parse_config
from scangate.gateway import create_app
from scangate.npy_codec import ScanArray, encode_npy

ADMIN_TOKEN = "tok-admin"
INSPECTOR_TOKEN = "tok-inspector"
VIEWER_TOKEN = "tok-viewer"

DEFAULT_TOKENS = [
    {"token": ADMIN_TOKEN, "name": "ada", "role": "admin"},
    {"token": INSPECTOR_TOKEN, "name": "ines", "role": "inspector"},
    {"token": VIEWER_TOKEN, "name": "vera", "role": "viewer"},
]


def auth(token: str) -> dict[str, str]:
    return {"Authorization": f"Bearer {token}"}


def write_scan(path: Path, array: np.ndarray) -> None:
    path.write_bytes(encode_npy(ScanArray.from_numpy(np.asarray(array))))


def write_dataset(directory: Path, dataset_id: str, scans: dict[str, np.ndarray],
                  name: str | None = None, description: str = "") -> Path:
    """Write manifest.json plus one NPY file per scan into ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for scan_id, array in scans.items():
        arr = np.asarray(array)
        write_scan(directory / f"{scan_id}.npy", arr)
        entries.append({
            "scan_id": scan_id,
            "file": f"{scan_id}.npy",
            "height": int(arr.shape[0]),
            "width": int(arr.shape[1]),
        })
    manifest = {
        "dataset_id": dataset_id,
        "name": name or dataset_id,
        "description": description,
        "scans": entries,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return directory


@dataclass
class Site:
    """On-disk layout for one server instance."""

    root: Path
    config: ServerConfig
    config_path: Path

    @property
    def datasets_root(self) -> Path:
        return self.config.datasets_root


def make_site(root: Path, port: int = 0, tokens=None, max_body_bytes: int | None = None) -> Site:
    raw = {
        "listen_addr": f"127.0.0.1:{port}",
        "datasets_root": str(root / "datasets"),
        "journal_path": str(root / "journal.ndjson"),
        "audit_path": str(root / "audit.ndjson"),
        "tokens": DEFAULT_TOKENS if tokens is None else tokens,
    }
    if max_body_bytes is not None:
        raw["max_body_bytes"] = max_body_bytes
    (root / "datasets").mkdir(parents=True, exist_ok=True)
    config_path = root / "config.json"
    config_path.write_text(json.dumps(raw, indent=1))
    return Site(root=root, config=parse_config(raw), config_path=config_path)


@pytest.fixture
def site(tmp_path: Path) -> Site:
    return make_site(tmp_path)


@pytest.fixture
def client(site: Site) -> TestClient:
    return TestClient(create_app(site.config), raise_server_exceptions=False)


class LiveServer:
    """uvicorn in a daemon thread on an ephemeral port."""

    def __init__(self, app):
        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> "LiveServer":
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start in time")
            time.sleep(0.01)
        sock: socket.socket = self._server.servers[0].sockets[0]
        self.port = sock.getsockname()[1]
        self.base_url = f"http://127.0.0.1:{self.port}"
        return self

    def __exit__(self, *exc) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture
def live_server(site: Site):
    with LiveServer(create_app(site.config)) as server:
        server.site = site
        yield server


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def record_criterion(name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((name, passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'}")
