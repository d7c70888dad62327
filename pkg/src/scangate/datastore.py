"""Ingestion and serving of NPY scan datasets.

A dataset is a directory holding ``manifest.json`` plus the NPY files it
references.  Ingest validates everything eagerly (manifest schema, every
scan decodes to a 2-D array of the declared shape) and then serves scans
straight from the directory; nothing is copied.  Re-ingesting byte-for-byte
identical content is a no-op, while reusing a dataset id for different
content is refused.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .npy_codec import NpyFormatError, ScanArray, decode_npy

MANIFEST_NAME = "manifest.json"


class DatastoreError(Exception):
    """Base class for dataset ingestion and lookup failures."""


class MissingManifest(DatastoreError):
    pass


class BadManifest(DatastoreError):
    """manifest.json is unreadable or violates the manifest schema."""


class BadScanFile(DatastoreError):
    def __init__(self, scan_id: str, cause: str):
        super().__init__(f"scan {scan_id!r}: {cause}")
        self.scan_id = scan_id
        self.cause = cause


class ShapeMismatch(DatastoreError):
    def __init__(self, scan_id: str, declared: tuple[int, int], actual: tuple[int, ...]):
        super().__init__(
            f"scan {scan_id!r}: manifest declares {declared}, file holds {actual}"
        )
        self.scan_id = scan_id


class DuplicateDatasetId(DatastoreError):
    pass


class UnknownDataset(DatastoreError):
    pass


class UnknownScan(DatastoreError):
    pass


@dataclass(frozen=True)
class ScanEntry:
    scan_id: str
    file: str
    height: int
    width: int


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    name: str
    description: str
    scans: tuple[ScanEntry, ...]


@dataclass(frozen=True)
class DatasetSummary:
    dataset_id: str
    name: str
    description: str
    scan_count: int


@dataclass(frozen=True)
class _Dataset:
    directory: Path
    manifest: DatasetManifest
    fingerprint: str


class Datastore:
    """In-memory index over ingested dataset directories.

    Reads are lock-free against immutable snapshots; ingests are
    serialized and publish their dataset atomically.  Passing ``root``
    ingests every subdirectory containing a manifest at startup.
    """

    def __init__(self, root: str | Path | None = None):
        self._datasets: dict[str, _Dataset] = {}
        self._ingest_lock = threading.Lock()
        if root is not None:
            self.scan_root(root)

    def scan_root(self, root: str | Path) -> list[DatasetManifest]:
        """Ingest every dataset directory directly under ``root``."""
        rootdir = Path(root)
        ingested = []
        for child in sorted(p for p in rootdir.iterdir() if p.is_dir()):
            if (child / MANIFEST_NAME).exists():
                ingested.append(self.ingest(child))
        return ingested

    def ingest(self, directory: str | Path) -> DatasetManifest:
        """Validate and register the dataset stored in ``directory``."""
        dirpath = Path(directory)
        manifest_path = dirpath / MANIFEST_NAME
        if not manifest_path.exists():
            raise MissingManifest(f"no {MANIFEST_NAME} in {dirpath}")
        manifest, raw = _load_manifest(manifest_path)
        digest = hashlib.sha256(json.dumps(raw, sort_keys=True).encode())
        for entry in manifest.scans:
            scan_path = _resolve_scan_path(dirpath, entry)
            try:
                blob = scan_path.read_bytes()
            except OSError as exc:
                raise BadScanFile(entry.scan_id, f"unreadable file {entry.file!r}: {exc}") from exc
            try:
                scan = decode_npy(blob)
            except NpyFormatError as exc:
                raise BadScanFile(entry.scan_id, str(exc)) from exc
            if len(scan.shape) != 2:
                raise BadScanFile(entry.scan_id, f"not a 2-D scan (shape {scan.shape})")
            if scan.shape != (entry.height, entry.width):
                raise ShapeMismatch(entry.scan_id, (entry.height, entry.width), scan.shape)
            digest.update(hashlib.sha256(blob).digest())
        fingerprint = digest.hexdigest()
        with self._ingest_lock:
            existing = self._datasets.get(manifest.dataset_id)
            if existing is not None:
                if existing.fingerprint == fingerprint:
                    return existing.manifest
                raise DuplicateDatasetId(
                    f"dataset {manifest.dataset_id!r} already registered with different content"
                )
            self._datasets[manifest.dataset_id] = _Dataset(dirpath, manifest, fingerprint)
        return manifest

    def list_datasets(self) -> list[DatasetSummary]:
        return [
            DatasetSummary(
                ds.manifest.dataset_id,
                ds.manifest.name,
                ds.manifest.description,
                len(ds.manifest.scans),
            )
            for _, ds in sorted(self._datasets.items())
        ]

    def get_manifest(self, dataset_id: str) -> DatasetManifest:
        return self._require(dataset_id).manifest

    def get_scan_bytes(self, dataset_id: str, scan_id: str) -> bytes:
        """Raw NPY bytes for a scan, exactly as stored on disk."""
        dataset = self._require(dataset_id)
        entry = self._require_scan(dataset, scan_id)
        return _resolve_scan_path(dataset.directory, entry).read_bytes()

    def get_scan(self, dataset_id: str, scan_id: str) -> ScanArray:
        return decode_npy(self.get_scan_bytes(dataset_id, scan_id))

    # -- ScanSource protocol (used by registry validation) --------------------

    def has_dataset(self, dataset_id: str) -> bool:
        return dataset_id in self._datasets

    def iter_scans(self, dataset_id: str) -> Iterator[tuple[str, ScanArray]]:
        dataset = self._require(dataset_id)
        for entry in dataset.manifest.scans:
            yield entry.scan_id, self.get_scan(dataset_id, entry.scan_id)

    def _require(self, dataset_id: str) -> _Dataset:
        dataset = self._datasets.get(dataset_id)
        if dataset is None:
            raise UnknownDataset(f"unknown dataset {dataset_id!r}")
        return dataset

    @staticmethod
    def _require_scan(dataset: _Dataset, scan_id: str) -> ScanEntry:
        for entry in dataset.manifest.scans:
            if entry.scan_id == scan_id:
                return entry
        raise UnknownScan(f"dataset {dataset.manifest.dataset_id!r} has no scan {scan_id!r}")


def _resolve_scan_path(directory: Path, entry: ScanEntry) -> Path:
    path = Path(entry.file)
    if path.is_absolute() or ".." in path.parts:
        raise BadManifest(f"scan {entry.scan_id!r} file path must stay inside the dataset dir")
    return directory / path


def _load_manifest(path: Path) -> tuple[DatasetManifest, dict]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BadManifest(f"cannot read {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise BadManifest(f"{path}: manifest must be a JSON object")
    try:
        dataset_id = raw["dataset_id"]
        name = raw.get("name", dataset_id)
        description = raw.get("description", "")
        scans_raw = raw["scans"]
        if not isinstance(scans_raw, list):
            raise BadManifest(f"{path}: 'scans' must be a list")
        entries = []
        for s in scans_raw:
            height, width = s["height"], s["width"]
            for dim in (height, width):
                if isinstance(dim, bool) or not isinstance(dim, int) or dim < 0:
                    raise BadManifest(f"{path}: height/width must be non-negative integers")
            entries.append(ScanEntry(str(s["scan_id"]), str(s["file"]), height, width))
        entries = tuple(entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadManifest(f"{path}: {exc!r}") from exc
    if not isinstance(dataset_id, str) or not dataset_id:
        raise BadManifest(f"{path}: dataset_id must be a non-empty string")
    seen = set()
    for entry in entries:
        if entry.scan_id in seen:
            raise BadManifest(f"{path}: duplicate scan_id {entry.scan_id!r}")
        seen.add(entry.scan_id)
    return DatasetManifest(dataset_id, str(name), str(description), entries), raw
