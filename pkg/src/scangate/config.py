"""Server configuration: listen address, storage paths, token seeds."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

DEFAULT_MAX_BODY_BYTES = 64 * 1024 * 1024


class ConfigError(Exception):
    pass


class Role(IntEnum):
    """Access levels; grants nest strictly: viewer < inspector < admin."""

    VIEWER = 1
    INSPECTOR = 2
    ADMIN = 3

    @classmethod
    def from_name(cls, name: str) -> "Role":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ConfigError(f"unknown role {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Principal:
    name: str
    role: Role
    token: str


@dataclass(frozen=True)
class ServerConfig:
    listen_addr: str
    datasets_root: Path
    journal_path: Path
    audit_path: Path
    tokens: tuple[Principal, ...]
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES

    @property
    def host(self) -> str:
        return self.listen_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_addr.rsplit(":", 1)[1])


def load_config(path: str | Path) -> ServerConfig:
    """Load and validate the JSON server config file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(raw)


def parse_config(raw: dict) -> ServerConfig:
    for key in ("listen_addr", "datasets_root", "journal_path", "audit_path"):
        if key not in raw or not isinstance(raw[key], str) or not raw[key]:
            raise ConfigError(f"config key {key!r} must be a non-empty string")
    listen = raw["listen_addr"]
    host, sep, port = listen.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise ConfigError(f"listen_addr must be host:port, got {listen!r}")
    paths = [raw["datasets_root"], raw["journal_path"], raw["audit_path"]]
    if len({str(Path(p)) for p in paths}) != len(paths):
        raise ConfigError("datasets_root, journal_path and audit_path must be distinct")
    max_body = raw.get("max_body_bytes", DEFAULT_MAX_BODY_BYTES)
    if not isinstance(max_body, int) or isinstance(max_body, bool) or max_body <= 0:
        raise ConfigError("max_body_bytes must be a positive integer")
    tokens_raw = raw.get("tokens", [])
    if not isinstance(tokens_raw, list):
        raise ConfigError("tokens must be a list")
    principals = []
    seen_tokens = set()
    for i, entry in enumerate(tokens_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"tokens[{i}] must be an object")
        try:
            token, name, role = entry["token"], entry["name"], entry["role"]
        except KeyError as exc:
            raise ConfigError(f"tokens[{i}] missing key {exc}") from None
        if not isinstance(token, str) or not token:
            raise ConfigError(f"tokens[{i}].token must be a non-empty string")
        if token in seen_tokens:
            raise ConfigError(f"tokens[{i}].token duplicates an earlier token")
        seen_tokens.add(token)
        principals.append(Principal(str(name), Role.from_name(str(role)), token))
    return ServerConfig(
        listen_addr=listen,
        datasets_root=Path(raw["datasets_root"]),
        journal_path=Path(raw["journal_path"]),
        audit_path=Path(raw["audit_path"]),
        tokens=tuple(principals),
        max_body_bytes=max_body,
    )
