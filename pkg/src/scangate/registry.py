"""Versioned model repository with zero-disruption promotion.

Each model id owns a strictly increasing sequence of versions, each in
one of three lifecycle states: Staged (registered, not serving), Active
(serving, at most one per model), Retired (previously serving).  New
versions are registered and validated in parallel with the Active one;
``promote`` swaps the Active pointer atomically, and ``rollback``
re-activates the most recently retired version.

Readers (``resolve_active``, ``list_models``) never take a lock: the
per-model record is an immutable snapshot replaced wholesale by writers,
so a read concurrent with a promotion observes either the old or the new
state, never a mix.  All mutations are serialized and appended to a
newline-delimited JSON journal which is replayed at startup.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol

from . import inference
from .npy_codec import ScanArray


class RegistryError(Exception):
    """Base class for registry operation failures."""


class UnknownModel(RegistryError):
    pass


class UnknownVersion(RegistryError):
    pass


class UnknownDataset(RegistryError):
    pass


class InvalidSchema(RegistryError):
    pass


class NotValidated(RegistryError):
    pass


class AlreadyActive(RegistryError):
    pass


class NoActiveVersion(RegistryError):
    pass


class NothingToRollBackTo(RegistryError):
    pass


class JournalError(Exception):
    """Journal file cannot be replayed; the message names the bad line."""


class ModelState(str, Enum):
    STAGED = "Staged"
    ACTIVE = "Active"
    RETIRED = "Retired"


@dataclass(frozen=True)
class ParamSpec:
    """One user-adjustable parameter: kind, bounds, default.

    ``min``/``max`` are None for bools and mandatory for numeric kinds.
    """

    name: str
    kind: str
    min: float | int | None
    max: float | int | None
    default: object

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "min": self.min,
            "max": self.max,
            "default": self.default,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ParamSpec":
        return cls(obj["name"], obj["kind"], obj.get("min"), obj.get("max"), obj["default"])


@dataclass(frozen=True)
class ModelDescriptor:
    model_id: str
    version: int
    display_name: str
    detector: str
    param_schema: tuple[ParamSpec, ...]
    state: ModelState
    validated: bool
    created_at: str
    checksum: str


@dataclass(frozen=True)
class ActivationRecord:
    """One promotion or rollback: which version took over from which."""

    model_id: str
    previous_active: int | None
    new_active: int
    at: str


@dataclass(frozen=True)
class ScanValidation:
    scan_id: str
    roi_count: int | None
    error: str | None


@dataclass(frozen=True)
class ValidationReport:
    model_id: str
    version: int
    dataset_id: str
    entries: tuple[ScanValidation, ...]
    validated: bool
    at: str


class ScanSource(Protocol):
    """What the registry needs from a dataset store to run validation."""

    def has_dataset(self, dataset_id: str) -> bool: ...

    def iter_scans(self, dataset_id: str) -> Iterable[tuple[str, ScanArray]]: ...


@dataclass(frozen=True)
class _ModelRecord:
    """Immutable per-model snapshot swapped atomically by writers."""

    versions: tuple[ModelDescriptor, ...]  # ascending by version
    active: int | None
    retired_order: tuple[int, ...]  # oldest retirement first

    def find(self, version: int) -> ModelDescriptor | None:
        for desc in self.versions:
            if desc.version == version:
                return desc
        return None

    def with_version(self, desc: ModelDescriptor) -> "_ModelRecord":
        versions = tuple(d if d.version != desc.version else desc for d in self.versions)
        return replace(self, versions=versions)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _descriptor_checksum(
    model_id: str,
    version: int,
    display_name: str,
    detector: str,
    param_schema: tuple[ParamSpec, ...],
    created_at: str,
) -> str:
    payload = json.dumps(
        {
            "model_id": model_id,
            "version": version,
            "display_name": display_name,
            "detector": detector,
            "param_schema": [spec.to_json() for spec in param_schema],
            "created_at": created_at,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return "sha256:" + hashlib.sha256(payload.encode()).hexdigest()


def normalize_schema(detector: str, specs: Iterable[ParamSpec]) -> tuple[ParamSpec, ...]:
    """Validate a schema against the detector's parameter contract.

    Required numeric parameters must be declared; ``confidence`` and
    ``merge`` are auto-filled with safe defaults when absent.  Raises
    InvalidSchema describing the first problem found.
    """
    if detector not in inference.REQUIRED_PARAMS:
        raise InvalidSchema(f"unknown detector kind {detector!r}")
    required = inference.REQUIRED_PARAMS[detector]
    allowed = {**required, **inference.OPTIONAL_PARAMS}
    seen: dict[str, ParamSpec] = {}
    for spec in specs:
        if spec.name in seen:
            raise InvalidSchema(f"duplicate parameter {spec.name!r}")
        if spec.name not in allowed:
            raise InvalidSchema(f"parameter {spec.name!r} unknown for detector {detector!r}")
        if spec.kind != allowed[spec.name]:
            raise InvalidSchema(
                f"parameter {spec.name!r} must have kind {allowed[spec.name]!r}, got {spec.kind!r}"
            )
        _check_spec_bounds(spec)
        seen[spec.name] = spec
    for name in required:
        if name not in seen:
            raise InvalidSchema(f"detector {detector!r} requires parameter {name!r}")
    if "confidence" not in seen:
        seen["confidence"] = ParamSpec("confidence", "float", 0.0, 1.0, 0.0)
    if "merge" not in seen:
        seen["merge"] = ParamSpec("merge", "bool", None, None, True)
    # Stable order: required params in contract order, then confidence, merge.
    ordered = [seen[name] for name in required] + [seen["confidence"], seen["merge"]]
    return tuple(ordered)


def _check_spec_bounds(spec: ParamSpec) -> None:
    if spec.kind == "bool":
        if spec.min is not None or spec.max is not None:
            raise InvalidSchema(f"bool parameter {spec.name!r} cannot have bounds")
        if not isinstance(spec.default, bool):
            raise InvalidSchema(f"bool parameter {spec.name!r} needs a bool default")
        return
    if spec.kind not in ("float", "int"):
        raise InvalidSchema(f"parameter {spec.name!r} has unknown kind {spec.kind!r}")
    for bound in (spec.min, spec.max, spec.default):
        if isinstance(bound, bool) or not isinstance(bound, (int, float)):
            raise InvalidSchema(f"parameter {spec.name!r} needs numeric min/max/default")
    if spec.kind == "int" and not all(
        isinstance(v, int) for v in (spec.min, spec.max, spec.default)
    ):
        raise InvalidSchema(f"int parameter {spec.name!r} needs integer min/max/default")
    if not spec.min <= spec.default <= spec.max:
        raise InvalidSchema(
            f"parameter {spec.name!r} default {spec.default} outside [{spec.min}, {spec.max}]"
        )
    # Detector-side preconditions, enforced here so inference cannot be
    # handed a value its detector rejects.
    if spec.name == "k" and spec.min <= 0:
        raise InvalidSchema("parameter 'k' must have min > 0")
    if spec.name == "window" and spec.min < 3:
        raise InvalidSchema("parameter 'window' must have min >= 3")
    if spec.name == "confidence" and (spec.min < 0 or spec.max > 1):
        raise InvalidSchema("parameter 'confidence' bounds must stay within [0, 1]")


class Registry:
    """Journal-backed model registry; see module docstring for semantics."""

    def __init__(self, journal_path: str | Path, scan_source: ScanSource | None = None):
        self._journal_path = Path(journal_path)
        self._scan_source = scan_source
        self._write_lock = threading.Lock()
        self._models: dict[str, _ModelRecord] = {}
        if self._journal_path.exists():
            self._replay()

    @property
    def journal_path(self) -> Path:
        return self._journal_path

    # -- lifecycle operations -------------------------------------------------

    def register_model(
        self,
        model_id: str,
        display_name: str,
        detector: str,
        param_schema: Iterable[ParamSpec],
    ) -> ModelDescriptor:
        """Register a new Staged version; the Active version is untouched."""
        schema = normalize_schema(detector, param_schema)
        with self._write_lock:
            record = self._models.get(model_id, _ModelRecord((), None, ()))
            version = max((d.version for d in record.versions), default=0) + 1
            created_at = _now()
            desc = ModelDescriptor(
                model_id=model_id,
                version=version,
                display_name=display_name,
                detector=detector,
                param_schema=schema,
                state=ModelState.STAGED,
                validated=False,
                created_at=created_at,
                checksum=_descriptor_checksum(
                    model_id, version, display_name, detector, schema, created_at
                ),
            )
            self._append_event(
                {
                    "ts": created_at,
                    "event": "register",
                    "model_id": model_id,
                    "version": version,
                    "display_name": display_name,
                    "detector": detector,
                    "param_schema": [spec.to_json() for spec in schema],
                    "created_at": created_at,
                    "checksum": desc.checksum,
                }
            )
            self._models[model_id] = replace(record, versions=record.versions + (desc,))
            return desc

    def validate(self, model_id: str, version: int, dataset_id: str) -> ValidationReport:
        """Run the staged version over a dataset with default parameters.

        Marks the version validated iff every scan ran without error.  The
        Active version keeps serving; nothing here touches it.
        """
        desc = self._get_version(model_id, version)
        if desc.state is not ModelState.STAGED:
            raise UnknownVersion(
                f"version {version} of {model_id!r} is {desc.state.value}; "
                "only Staged versions can be validated"
            )
        if self._scan_source is None or not self._scan_source.has_dataset(dataset_id):
            raise UnknownDataset(f"unknown dataset {dataset_id!r}")
        entries = []
        for scan_id, scan in self._scan_source.iter_scans(dataset_id):
            try:
                outcome = inference.run_inference(desc, scan, {})
                entries.append(ScanValidation(scan_id, len(outcome.rois), None))
            except Exception as exc:
                entries.append(ScanValidation(scan_id, None, f"{type(exc).__name__}: {exc}"))
        validated = all(entry.error is None for entry in entries)
        at = _now()
        with self._write_lock:
            record = self._models[model_id]
            desc = record.find(version)
            if desc is None or desc.state is not ModelState.STAGED:
                raise UnknownVersion(f"version {version} of {model_id!r} changed state mid-validation")
            self._append_event(
                {
                    "ts": at,
                    "event": "validate",
                    "model_id": model_id,
                    "version": version,
                    "dataset_id": dataset_id,
                    "validated": validated,
                    "entries": [
                        {"scan_id": e.scan_id, "roi_count": e.roi_count, "error": e.error}
                        for e in entries
                    ],
                }
            )
            self._models[model_id] = record.with_version(replace(desc, validated=validated))
        return ValidationReport(model_id, version, dataset_id, tuple(entries), validated, at)

    def promote(self, model_id: str, version: int, force: bool = False) -> ActivationRecord:
        """Atomically make a staged version Active, retiring the current one."""
        with self._write_lock:
            record = self._require_model(model_id)
            desc = record.find(version)
            if desc is None:
                raise UnknownVersion(f"model {model_id!r} has no version {version}")
            if desc.state is ModelState.ACTIVE:
                raise AlreadyActive(f"version {version} of {model_id!r} is already Active")
            if desc.state is ModelState.RETIRED:
                raise UnknownVersion(
                    f"version {version} of {model_id!r} is Retired; register a new version "
                    "or roll back instead"
                )
            if not desc.validated and not force:
                raise NotValidated(f"version {version} of {model_id!r} has not been validated")
            at = _now()
            self._append_event(
                {
                    "ts": at,
                    "event": "promote",
                    "model_id": model_id,
                    "version": version,
                    "previous": record.active,
                    "forced": force,
                }
            )
            self._models[model_id] = self._swap_active(record, version)
            return ActivationRecord(model_id, record.active, version, at)

    def rollback(self, model_id: str) -> ActivationRecord:
        """Re-activate the most recently retired version."""
        with self._write_lock:
            record = self._require_model(model_id)
            if record.active is None or not record.retired_order:
                raise NothingToRollBackTo(f"model {model_id!r} has no retired version to restore")
            target = record.retired_order[-1]
            at = _now()
            self._append_event(
                {
                    "ts": at,
                    "event": "rollback",
                    "model_id": model_id,
                    "version": target,
                    "previous": record.active,
                }
            )
            self._models[model_id] = self._swap_active(record, target)
            return ActivationRecord(model_id, record.active, target, at)

    # -- read side (lock-free) ------------------------------------------------

    def resolve_active(self, model_id: str) -> tuple[int, ModelDescriptor]:
        """Return the Active version; never blocks on a concurrent promotion."""
        record = self._models.get(model_id)
        if record is None:
            raise UnknownModel(f"unknown model {model_id!r}")
        if record.active is None:
            raise NoActiveVersion(f"model {model_id!r} has no Active version")
        desc = record.find(record.active)
        assert desc is not None
        return record.active, desc

    def list_models(self, include_retired: bool = False) -> list[ModelDescriptor]:
        out = []
        for model_id in sorted(self._models):
            for desc in self._models[model_id].versions:
                if desc.state is ModelState.RETIRED and not include_retired:
                    continue
                out.append(desc)
        return out

    def dump_state(self) -> dict:
        """Plain-data snapshot of every model, for comparison and debugging."""
        return {
            model_id: {
                "active": record.active,
                "retired_order": list(record.retired_order),
                "versions": [
                    {
                        "version": d.version,
                        "display_name": d.display_name,
                        "detector": d.detector,
                        "param_schema": [s.to_json() for s in d.param_schema],
                        "state": d.state.value,
                        "validated": d.validated,
                        "created_at": d.created_at,
                        "checksum": d.checksum,
                    }
                    for d in record.versions
                ],
            }
            for model_id, record in sorted(self._models.items())
        }

    # -- internals ------------------------------------------------------------

    def _require_model(self, model_id: str) -> _ModelRecord:
        record = self._models.get(model_id)
        if record is None:
            raise UnknownModel(f"unknown model {model_id!r}")
        return record

    def _get_version(self, model_id: str, version: int) -> ModelDescriptor:
        record = self._require_model(model_id)
        desc = record.find(version)
        if desc is None:
            raise UnknownVersion(f"model {model_id!r} has no version {version}")
        return desc

    @staticmethod
    def _swap_active(record: _ModelRecord, target: int) -> _ModelRecord:
        versions = []
        for desc in record.versions:
            if desc.version == target:
                versions.append(replace(desc, state=ModelState.ACTIVE))
            elif desc.version == record.active:
                versions.append(replace(desc, state=ModelState.RETIRED))
            else:
                versions.append(desc)
        retired = tuple(v for v in record.retired_order if v != target)
        if record.active is not None:
            retired = retired + (record.active,)
        return _ModelRecord(tuple(versions), target, retired)

    def _append_event(self, event: dict) -> None:
        self._journal_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")

    def _replay(self) -> None:
        with open(self._journal_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                    self._apply_event(event)
                except JournalError:
                    raise
                except Exception as exc:
                    raise JournalError(
                        f"corrupt journal {self._journal_path} line {lineno}: {exc}"
                    ) from exc

    def _apply_event(self, event: dict) -> None:
        kind = event["event"]
        model_id = event["model_id"]
        if kind == "register":
            schema = tuple(ParamSpec.from_json(s) for s in event["param_schema"])
            expected = _descriptor_checksum(
                model_id,
                event["version"],
                event["display_name"],
                event["detector"],
                schema,
                event["created_at"],
            )
            if expected != event["checksum"]:
                raise ValueError("register event checksum mismatch")
            record = self._models.get(model_id, _ModelRecord((), None, ()))
            if record.find(event["version"]) is not None:
                raise ValueError(f"duplicate version {event['version']}")
            desc = ModelDescriptor(
                model_id=model_id,
                version=event["version"],
                display_name=event["display_name"],
                detector=event["detector"],
                param_schema=schema,
                state=ModelState.STAGED,
                validated=False,
                created_at=event["created_at"],
                checksum=event["checksum"],
            )
            self._models[model_id] = replace(record, versions=record.versions + (desc,))
        elif kind == "validate":
            record = self._models[model_id]
            desc = record.find(event["version"])
            if desc is None:
                raise ValueError(f"validate of unknown version {event['version']}")
            self._models[model_id] = record.with_version(
                replace(desc, validated=event["validated"])
            )
        elif kind in ("promote", "rollback"):
            record = self._models[model_id]
            desc = record.find(event["version"])
            if desc is None:
                raise ValueError(f"{kind} of unknown version {event['version']}")
            if record.active != event["previous"]:
                raise ValueError(
                    f"{kind} expected previous active {event['previous']}, "
                    f"journal state has {record.active}"
                )
            self._models[model_id] = self._swap_active(record, event["version"])
        else:
            raise ValueError(f"unknown event kind {kind!r}")
