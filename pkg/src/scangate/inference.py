"""Anomaly detectors over 2-D scan grids.

Three classical detectors share one shape: pick candidate cells by a
statistic, normalize the statistic into a [0, 1] score against the
scan-wide maximum, drop candidates below the caller's confidence floor,
and optionally merge 8-connected blobs into a single point of interest.
``run_inference`` wraps a detector with per-model parameter resolution
(schema defaults overlaid with caller overrides) and timing.

All functions here are pure; they hold no shared state and may run from
any number of threads at once.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Union

import numpy as np

from .npy_codec import ScanArray

if TYPE_CHECKING:
    from .registry import ModelDescriptor

Grid = Union[ScanArray, np.ndarray]

#: Detector kind -> numeric parameters every model schema must declare.
REQUIRED_PARAMS: dict[str, dict[str, str]] = {
    "threshold": {"theta": "float"},
    "zscore": {"k": "float"},
    "local_contrast": {"window": "int", "k": "float"},
}

#: Parameters shared by all detectors (auto-filled at registration).
OPTIONAL_PARAMS: dict[str, str] = {"confidence": "float", "merge": "bool"}

_MAD_EPSILON = 1e-9


class InferenceError(ValueError):
    """Base class for detector and parameter-resolution failures."""


class NotTwoDimensional(InferenceError):
    """Scan is not a 2-D grid."""


class NonFiniteValue(InferenceError):
    """Scan contains NaN or infinity."""


class EvenWindow(InferenceError):
    """local_contrast window is not an odd integer >= 3."""


class UnknownParam(InferenceError):
    """Override names a parameter absent from the model schema."""


class ParamOutOfRange(InferenceError):
    """Parameter value falls outside its declared [min, max] bounds."""


class ParamKindMismatch(InferenceError):
    """Parameter value has the wrong kind for its declaration."""


@dataclass(frozen=True)
class Roi:
    """A detected point of interest: grid coordinates plus confidence."""

    row: int
    col: int
    score: float


@dataclass(frozen=True)
class InferenceOutcome:
    """Standardized detector result, sorted by descending score."""

    rois: tuple[Roi, ...]
    model_id: str
    version: int
    params_used: dict[str, object]
    duration_ms: float


def _as_grid(scan: Grid) -> np.ndarray:
    arr = scan.to_numpy() if isinstance(scan, ScanArray) else np.asarray(scan)
    if arr.ndim != 2:
        raise NotTwoDimensional(f"scan must be 2-D, got shape {arr.shape}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("scan contains non-finite values")
    return arr


def _check_confidence(confidence: float) -> float:
    if not 0.0 <= confidence <= 1.0:
        raise ParamOutOfRange(f"confidence must be in [0, 1], got {confidence}")
    return float(confidence)


def _emit(stat: np.ndarray, cutoff: float, confidence: float, merge: bool) -> list[Roi]:
    """Statistic grid -> sorted ROIs, via the shared score normalization.

    Candidates are the cells with ``stat >= cutoff``.  With S the
    scan-wide max of the statistic, score = (stat - cutoff) / (S - cutoff)
    when S > cutoff, else 1.0 (every candidate then sits exactly at the
    cutoff).
    """
    mask = stat >= cutoff
    if not mask.any():
        return []
    peak = float(stat.max())
    if peak > cutoff:
        scores = (stat - cutoff) / (peak - cutoff)
    else:
        scores = np.ones_like(stat)
    candidates = [
        (int(r), int(c), float(scores[r, c]))
        for r, c in np.argwhere(mask)
        if scores[r, c] >= confidence
    ]
    if merge:
        return cluster_rois(candidates)
    return _sorted_rois(Roi(r, c, s) for r, c, s in candidates)


def _sorted_rois(rois: Iterable[Roi]) -> list[Roi]:
    return sorted(rois, key=lambda roi: (-roi.score, roi.row, roi.col))


def threshold_detect(
    scan: Grid, theta: float, confidence: float = 0.0, merge: bool = True
) -> list[Roi]:
    """Flag cells with value >= theta, scored against the scan maximum."""
    grid = _as_grid(scan)
    _check_confidence(confidence)
    return _emit(grid, float(theta), confidence, merge)


def zscore_detect(
    scan: Grid, k: float, confidence: float = 0.0, merge: bool = True
) -> list[Roi]:
    """Flag cells at least k population standard deviations from the mean.

    A constant scan (sigma == 0) yields no detections.
    """
    grid = _as_grid(scan)
    _check_confidence(confidence)
    if k <= 0:
        raise ParamOutOfRange(f"k must be > 0, got {k}")
    sigma = float(grid.std())
    if sigma == 0.0:
        return []
    z = np.abs(grid - float(grid.mean())) / sigma
    return _emit(z, float(k), confidence, merge)


def local_contrast_detect(
    scan: Grid, window: int, k: float, confidence: float = 0.0, merge: bool = True
) -> list[Roi]:
    """Flag cells deviating from their neighborhood median by >= k MADs.

    The window is clipped at the borders; MAD gets a 1e-9 floor so flat
    neighborhoods do not divide by zero.
    """
    grid = _as_grid(scan)
    _check_confidence(confidence)
    if not isinstance(window, int) or isinstance(window, bool) or window < 3 or window % 2 == 0:
        raise EvenWindow(f"window must be an odd integer >= 3, got {window!r}")
    if k <= 0:
        raise ParamOutOfRange(f"k must be > 0, got {k}")
    half = window // 2
    # NaN padding + nanmedian == median over the border-clipped window.
    padded = np.pad(grid, half, constant_values=np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    with np.errstate(invalid="ignore"):
        med = np.nanmedian(windows, axis=(2, 3))
        mad = np.nanmedian(np.abs(windows - med[:, :, None, None]), axis=(2, 3))
    deviation = np.abs(grid - med) / (mad + _MAD_EPSILON)
    return _emit(deviation, float(k), confidence, merge)


def cluster_rois(candidates: Iterable[tuple[int, int, float]]) -> list[Roi]:
    """Collapse 8-connected candidate cells into one ROI per blob.

    Each blob becomes a single ROI at the integer centroid (mean row/col,
    rounded half up) carrying the blob's maximum score.
    """
    best: dict[tuple[int, int], float] = {}
    for row, col, score in candidates:
        key = (int(row), int(col))
        if key not in best or score > best[key]:
            best[key] = float(score)
    remaining = set(best)
    rois = []
    while remaining:
        stack = [remaining.pop()]
        component = []
        while stack:
            cell = stack.pop()
            component.append(cell)
            r, c = cell
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    neighbor = (r + dr, c + dc)
                    if neighbor in remaining:
                        remaining.remove(neighbor)
                        stack.append(neighbor)
        rois.append(
            Roi(
                _round_half_up(sum(r for r, _ in component) / len(component)),
                _round_half_up(sum(c for _, c in component) / len(component)),
                max(best[cell] for cell in component),
            )
        )
    return _sorted_rois(rois)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


_DETECTORS = {
    "threshold": threshold_detect,
    "zscore": zscore_detect,
    "local_contrast": local_contrast_detect,
}


def detector_kinds() -> tuple[str, ...]:
    return tuple(_DETECTORS)


def resolve_params(desc: "ModelDescriptor", overrides: Mapping[str, object]) -> dict[str, object]:
    """Overlay overrides onto schema defaults, enforcing kind and bounds."""
    by_name = {spec.name: spec for spec in desc.param_schema}
    for name in overrides:
        if name not in by_name:
            raise UnknownParam(f"unknown parameter {name!r} for model {desc.model_id!r}")
    resolved: dict[str, object] = {}
    for spec in desc.param_schema:
        value = overrides.get(spec.name, spec.default)
        resolved[spec.name] = _coerce(spec, value)
    return resolved


def _coerce(spec, value):
    if spec.kind == "bool":
        if not isinstance(value, bool):
            raise ParamKindMismatch(f"parameter {spec.name!r} expects a bool, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParamKindMismatch(f"parameter {spec.name!r} expects a {spec.kind}, got {value!r}")
    if spec.kind == "int" and not isinstance(value, int):
        raise ParamKindMismatch(f"parameter {spec.name!r} expects an int, got {value!r}")
    if not spec.min <= value <= spec.max:
        raise ParamOutOfRange(
            f"parameter {spec.name!r}={value} outside [{spec.min}, {spec.max}]"
        )
    return float(value) if spec.kind == "float" else int(value)


def run_inference(
    desc: "ModelDescriptor", scan: Grid, overrides: Mapping[str, object] | None = None
) -> InferenceOutcome:
    """Run the model's detector on a scan with resolved parameters."""
    params = resolve_params(desc, overrides or {})
    detector = _DETECTORS[desc.detector]
    start = time.perf_counter()
    rois = detector(scan, **params)
    duration_ms = (time.perf_counter() - start) * 1000.0
    return InferenceOutcome(
        rois=tuple(rois),
        model_id=desc.model_id,
        version=desc.version,
        params_used=params,
        duration_ms=duration_ms,
    )
