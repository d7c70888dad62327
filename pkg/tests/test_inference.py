"""Detector behavior vs independent brute-force references, plus param plumbing."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scangate.inference import (
    EvenWindow,
    NonFiniteValue,
    NotTwoDimensional,
    ParamKindMismatch,
    ParamOutOfRange,
    Roi,
    UnknownParam,
    cluster_rois,
    local_contrast_detect,
    resolve_params,
    run_inference,
    threshold_detect,
    zscore_detect,
)
from scangate.npy_codec import ScanArray
from scangate.registry import ModelDescriptor, ModelState, ParamSpec, normalize_schema

from .oracles import (
    brute_local_contrast,
    brute_merge,
    brute_threshold,
    brute_zscore,
    rois_as_map,
    rois_as_set,
)

SCORE_TOL = 1e-9


def grids_equal(rois, expected):
    """Cell sets exact, scores within SCORE_TOL. expected maps (row, col) -> score."""
    got = rois_as_map(rois)
    if set(got) != set(expected):
        return False
    return all(abs(got[cell] - expected[cell]) <= SCORE_TOL for cell in expected)


# -- frozen examples ---------------------------------------------------------


def test_threshold_example_single_hit():
    rois = threshold_detect(np.array([[0.0, 0.0], [0.0, 5.0]]), theta=3.0)
    assert rois == [Roi(1, 1, 1.0)]


def test_threshold_example_confidence_floor():
    grid = np.arange(1.0, 10.0).reshape(3, 3)
    rois = threshold_detect(grid, theta=5.0, confidence=0.5, merge=False)
    assert rois == [Roi(2, 2, 1.0), Roi(2, 1, 0.75), Roi(2, 0, 0.5)]


def test_threshold_all_above_cutoff_scores_one():
    # peak == cutoff: every candidate collapses to score 1.0
    rois = threshold_detect(np.full((2, 2), 4.0), theta=4.0, merge=False)
    assert [r.score for r in rois] == [1.0] * 4


def test_zscore_example():
    grid = np.array([[0.0, 0.0, 0.0, 0.0, 10.0]])
    assert zscore_detect(grid, k=1.5) == [Roi(0, 4, 1.0)]


def test_zscore_flat_grid_is_empty():
    assert zscore_detect(np.full((3, 3), 7.0), k=0.5) == []


def test_local_contrast_example():
    grid = np.zeros((5, 5))
    grid[2, 2] = 10.0
    assert local_contrast_detect(grid, window=3, k=2.0) == [Roi(2, 2, 1.0)]


def test_local_contrast_even_window_rejected():
    for window in (4, 2, 0, -3, 1):
        with pytest.raises(EvenWindow):
            local_contrast_detect(np.zeros((3, 3)), window=window, k=1.0)


def test_scan_must_be_two_dimensional():
    with pytest.raises(NotTwoDimensional):
        threshold_detect(np.zeros(4), theta=1.0)
    with pytest.raises(NotTwoDimensional):
        zscore_detect(ScanArray("f64", (2, 2, 2), bytes(64)), k=1.0)


def test_non_finite_values_rejected():
    for bad in (math.nan, math.inf, -math.inf):
        grid = np.array([[0.0, bad]])
        with pytest.raises(NonFiniteValue):
            threshold_detect(grid, theta=1.0)


# -- ROI ordering ------------------------------------------------------------


def test_sort_descending_score_then_row_col():
    grid = np.array([[5.0, 0.0, 5.0], [0.0, 9.0, 0.0]])
    rois = threshold_detect(grid, theta=5.0, merge=False)
    assert [(r.row, r.col) for r in rois] == [(1, 1), (0, 0), (0, 2)]
    assert rois[0].score == 1.0 and rois[1].score == rois[2].score


# -- clustering --------------------------------------------------------------


def test_cluster_example_adjacent_pair():
    assert cluster_rois([(0, 0, 0.5), (0, 1, 0.9)]) == [Roi(0, 1, 0.9)]


def test_cluster_diagonal_counts_as_adjacent():
    assert cluster_rois([(0, 0, 0.4), (1, 1, 0.6)]) == [Roi(1, 1, 0.6)]


def test_cluster_centroid_rounds_half_up():
    # centroid of rows {0,1} is 0.5, rounds to 1
    rois = cluster_rois([(0, 0, 0.5), (1, 0, 0.5), (1, 1, 0.5), (0, 1, 0.5)])
    assert rois == [Roi(1, 1, 0.5)]


def test_cluster_separate_components_stay_apart():
    rois = cluster_rois([(0, 0, 0.3), (0, 2, 0.8)])
    assert rois == [Roi(0, 2, 0.8), Roi(0, 0, 0.3)]


def test_cluster_empty():
    assert cluster_rois([]) == []


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 7), st.integers(0, 7),
                  st.floats(0.0, 1.0, allow_nan=False)),
        max_size=30,
        unique_by=lambda t: (t[0], t[1]),
    )
)
def test_cluster_matches_union_find_reference(cands):
    expected = brute_merge({(r, c): s for r, c, s in cands})
    assert rois_as_set(cluster_rois(cands)) == expected


# -- oracle equivalence (sampled here, exhaustive in the acceptance suite) ---


def test_threshold_oracle_exhaustive_2x2():
    for packed in range(3 ** 4):
        vals, n = [], packed
        for _ in range(4):
            vals.append(float(n % 3))
            n //= 3
        grid = [vals[:2], vals[2:]]
        for theta in (0.0, 1.0, 2.0):
            for conf in (0.0, 0.5):
                got = threshold_detect(np.array(grid), theta=theta,
                                       confidence=conf, merge=False)
                assert grids_equal(got, brute_threshold(grid, theta, conf))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_zscore_oracle_random_grids(data):
    rows = data.draw(st.integers(1, 6))
    cols = data.draw(st.integers(1, 6))
    grid = [
        [data.draw(st.floats(-50, 50, allow_nan=False)) for _ in range(cols)]
        for _ in range(rows)
    ]
    k = data.draw(st.floats(0.1, 4.0))
    conf = data.draw(st.floats(0.0, 1.0))
    got = zscore_detect(np.array(grid), k=k, confidence=conf, merge=False)
    assert grids_equal(got, brute_zscore(grid, k, conf))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_local_contrast_oracle_random_grids(data):
    rows = data.draw(st.integers(1, 6))
    cols = data.draw(st.integers(1, 6))
    grid = [
        [data.draw(st.floats(-50, 50, allow_nan=False)) for _ in range(cols)]
        for _ in range(rows)
    ]
    window = data.draw(st.sampled_from([3, 5]))
    k = data.draw(st.floats(0.1, 4.0))
    got = local_contrast_detect(np.array(grid), window=window, k=k, merge=False)
    assert grids_equal(got, brute_local_contrast(grid, window, k, 0.0))


def test_merged_run_equals_reference_merge_of_candidates():
    rng = random.Random(7)
    for _ in range(50):
        grid = [[rng.uniform(-5, 5) for _ in range(8)] for _ in range(8)]
        theta = rng.uniform(-2, 2)
        raw = threshold_detect(np.array(grid), theta=theta, merge=False)
        merged = threshold_detect(np.array(grid), theta=theta, merge=True)
        assert rois_as_set(merged) == brute_merge(rois_as_map(raw))


# -- invariants --------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_confidence_subset_monotonicity(data):
    grid = np.array(
        [[data.draw(st.floats(-20, 20, allow_nan=False)) for _ in range(5)]
         for _ in range(5)]
    )
    lo = data.draw(st.floats(0.0, 1.0))
    hi = data.draw(st.floats(lo, 1.0))
    cells_hi = {(r.row, r.col) for r in zscore_detect(grid, k=1.0, confidence=hi, merge=False)}
    cells_lo = {(r.row, r.col) for r in zscore_detect(grid, k=1.0, confidence=lo, merge=False)}
    assert cells_hi <= cells_lo


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_theta_subset_monotonicity(data):
    grid = np.array(
        [[data.draw(st.floats(-20, 20, allow_nan=False)) for _ in range(5)]
         for _ in range(5)]
    )
    lo = data.draw(st.floats(-10, 10))
    hi = data.draw(st.floats(lo, 10))
    cells_hi = {(r.row, r.col) for r in threshold_detect(grid, theta=hi, merge=False)}
    cells_lo = {(r.row, r.col) for r in threshold_detect(grid, theta=lo, merge=False)}
    assert cells_hi <= cells_lo


def test_zscore_shift_scale_covariance():
    rng = random.Random(11)
    for _ in range(100):
        grid = np.array([[rng.uniform(-10, 10) for _ in range(6)] for _ in range(6)])
        a = rng.uniform(0.1, 100.0)
        b = rng.uniform(-50.0, 50.0)
        base = zscore_detect(grid, k=1.2, merge=False)
        moved = zscore_detect(a * grid + b, k=1.2, merge=False)
        assert {(r.row, r.col) for r in base} == {(r.row, r.col) for r in moved}
        base_scores = rois_as_map(base)
        for roi in moved:
            assert abs(roi.score - base_scores[(roi.row, roi.col)]) <= 1e-6


def test_scores_always_within_unit_interval():
    rng = random.Random(3)
    for _ in range(50):
        grid = np.array([[rng.uniform(-100, 100) for _ in range(7)] for _ in range(7)])
        for rois in (
            threshold_detect(grid, theta=rng.uniform(-50, 50), merge=False),
            zscore_detect(grid, k=rng.uniform(0.1, 3), merge=False),
            local_contrast_detect(grid, window=3, k=rng.uniform(0.1, 3), merge=False),
        ):
            for roi in rois:
                assert 0.0 <= roi.score <= 1.0


def test_detectors_are_deterministic():
    grid = np.array([[1.0, 8.0, 3.0], [9.0, 2.0, 7.0]])
    for fn, kw in (
        (threshold_detect, {"theta": 2.5}),
        (zscore_detect, {"k": 0.8}),
        (local_contrast_detect, {"window": 3, "k": 0.5}),
    ):
        assert fn(grid, **kw) == fn(grid, **kw)


# -- parameter resolution ----------------------------------------------------


def zscore_descriptor():
    specs = [ParamSpec("k", "float", 0.1, 10.0, 1.5)]
    schema = normalize_schema("zscore", specs)
    return ModelDescriptor(
        model_id="m", version=1, display_name="m", detector="zscore",
        param_schema=schema, state=ModelState.STAGED, validated=False,
        created_at="2026-01-01T00:00:00Z", checksum="sha256:stub",
    )


def test_resolve_defaults_and_overrides():
    desc = zscore_descriptor()
    assert resolve_params(desc, {}) == {"k": 1.5, "confidence": 0.0, "merge": True}
    got = resolve_params(desc, {"k": 2.0, "merge": False})
    assert got == {"k": 2.0, "confidence": 0.0, "merge": False}


def test_resolve_accepts_int_for_float_param():
    assert resolve_params(zscore_descriptor(), {"k": 2})["k"] == 2.0


def test_resolve_unknown_param():
    with pytest.raises(UnknownParam):
        resolve_params(zscore_descriptor(), {"theta": 1.0})


def test_resolve_out_of_range():
    desc = zscore_descriptor()
    with pytest.raises(ParamOutOfRange):
        resolve_params(desc, {"k": 0.01})
    with pytest.raises(ParamOutOfRange):
        resolve_params(desc, {"k": 99.0})
    with pytest.raises(ParamOutOfRange):
        resolve_params(desc, {"confidence": 1.5})


def test_resolve_kind_mismatch():
    desc = zscore_descriptor()
    with pytest.raises(ParamKindMismatch):
        resolve_params(desc, {"k": "big"})
    with pytest.raises(ParamKindMismatch):
        resolve_params(desc, {"merge": 1})
    with pytest.raises(ParamKindMismatch):
        resolve_params(desc, {"k": True})


def test_run_inference_reports_full_params_and_timing():
    desc = zscore_descriptor()
    scan = ScanArray.from_numpy(np.array([[0.0, 0.0, 0.0, 0.0, 10.0]]))
    outcome = run_inference(desc, scan, {})
    assert outcome.model_id == "m" and outcome.version == 1
    assert outcome.params_used == {"k": 1.5, "confidence": 0.0, "merge": True}
    assert outcome.rois == (Roi(0, 4, 1.0),)
    assert outcome.duration_ms >= 0.0


def test_run_inference_applies_overrides():
    desc = zscore_descriptor()
    scan = ScanArray.from_numpy(np.array([[0.0, 0.0, 0.0, 0.0, 10.0]]))
    outcome = run_inference(desc, scan, {"k": 9.5})
    assert outcome.params_used["k"] == 9.5
    assert outcome.rois == ()
