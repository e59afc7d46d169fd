"""Tests for the coarse-to-fine depth refiner and the loss ablation."""

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from helmholtz.cli import compute_landmarks, compute_sgm, synthesize
from helmholtz.evaluation import compute_metrics
from helmholtz.geometry import DepthMap, Intrinsics, StereoRig
from helmholtz.geometry.camera import depth_to_normalized_disparity, normalized_disparity_to_depth
from helmholtz.landmarks import Landmark, Observation, rasterize
from helmholtz.losses import LossWeights, TripletView, build_pyramid
from helmholtz.simulation import generate_sequence, linear_trajectory
from helmholtz.simulation.scenes import blank_wall, occluded_floor_scene, textured_wall
from helmholtz.stereo import SgmParams, nearest_fill, sgm_depth
from helmholtz.trainers import (
    DepthRefiner,
    RefinementError,
    RefineSchedule,
    RefineState,
    adapt_rates,
    descent_direction,
    initialize,
    parse_variant,
    run,
    run_ablation,
    step,
    upsample,
)
from helmholtz.utils.config import load_config

from conftest import WALL_RIG, make_view, wall_pattern

BENCHMARK_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "occluded_floor.yaml"


def two_scale_weights(**overrides):
    return LossWeights(n_scales=2, **overrides)


@pytest.fixture(scope="module")
def textured():
    view, gt = make_view(textured_wall(1.0, seed=8), step=0.03)
    semi_dense = np.where(np.indices(gt.shape).sum(axis=0) % 3 == 0, gt, 0.0)
    return replace(view, semi_dense=DepthMap.from_array(semi_dense)), gt


def wall_landmarks(rig, gt, pixels):
    """Landmarks at the ground-truth surface point behind each pixel (camera at the origin)."""
    k = rig.intrinsics
    landmarks = []
    for i, (u, v) in enumerate(pixels):
        z = gt[v, u]
        position = np.array([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z])
        pixel = (float(u), float(v))
        observations = [Observation(0, pixel, 1.0), Observation(2, pixel, 1.0)]
        landmarks.append(Landmark(i, position, observations))
    return landmarks


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ValueError, match="non-negative"):
            RefineSchedule(iters_per_scale=(3, -1))
        with pytest.raises(ValueError, match="initial_step"):
            RefineSchedule(initial_step=1.0, max_step=0.5)
        with pytest.raises(ValueError, match="shrink"):
            RefineSchedule(shrink=1.0)
        with pytest.raises(ValueError, match="clip_quantile"):
            RefineSchedule(clip_quantile=0.0)

    def test_from_config_broadcasts_int(self):
        schedule = RefineSchedule.from_config({"iters_per_scale": 7})
        assert schedule.iters_per_scale == (7, 7, 7, 7)

    def test_levels_are_listed_coarse_to_fine(self):
        schedule = RefineSchedule(iters_per_scale=(40, 30, 20, 10))
        assert schedule.iterations(3, 4) == 40
        assert schedule.iterations(0, 4) == 10
        with pytest.raises(ValueError, match="schedule lists"):
            schedule.iterations(0, 3)


class TestInitialize:
    def test_valid_semi_dense_round_trips(self, small_rig, rng):
        depth = rng.uniform(0.5, 5.0, small_rig.intrinsics.shape)
        state = initialize(DepthMap.from_array(depth), np.zeros(depth.shape), small_rig)
        np.testing.assert_allclose(normalized_disparity_to_depth(state.d_hat), depth, rtol=1e-12)

    def test_nothing_known(self, small_rig):
        shape = small_rig.intrinsics.shape
        state = initialize(DepthMap.empty(shape), np.zeros(shape), small_rig)
        np.testing.assert_array_equal(state.d_hat, 0.5)

    def test_single_landmark_fills_everything(self, small_rig):
        shape = small_rig.intrinsics.shape
        sparse = np.zeros(shape)
        sparse[5, 7] = 2.0
        state = initialize(DepthMap.empty(shape), sparse, small_rig)
        np.testing.assert_allclose(state.d_hat, depth_to_normalized_disparity(2.0))

    def test_semi_dense_takes_precedence(self, small_rig):
        shape = small_rig.intrinsics.shape
        semi_dense = np.zeros(shape)
        semi_dense[3, 3] = 1.0
        sparse = np.zeros(shape)
        sparse[3, 3] = 4.0
        state = initialize(DepthMap.from_array(semi_dense), sparse, small_rig)
        np.testing.assert_allclose(state.d_hat, depth_to_normalized_disparity(1.0))

    def test_shape_mismatch(self, small_rig):
        with pytest.raises(ValueError, match="vs rig"):
            initialize(DepthMap.empty((4, 4)), np.zeros((4, 4)), small_rig)

    def test_state_range(self):
        with pytest.raises(ValueError, match="outside"):
            RefineState(d_hat=np.full((2, 2), 1.5))


class TestStep:
    def test_stationary_point_is_converged(self, textured):
        view, gt = textured
        state = RefineState(d_hat=depth_to_normalized_disparity(gt))
        zero = two_scale_weights(w1=0.0, w2=0.0, w3=0.0, w4=0.0, w5=0.0)
        after = step(state, build_pyramid(view, 2), zero)
        assert after.converged
        np.testing.assert_array_equal(after.d_hat, state.d_hat)
        assert after.iteration == 0

    def test_perturbed_depth_improves(self, textured):
        view, gt = textured
        state = RefineState(d_hat=depth_to_normalized_disparity(1.1 * gt))
        after = step(state, build_pyramid(view, 2), two_scale_weights())
        assert after.iteration == 1
        assert after.history[1] < after.history[0]
        assert after.d_hat.min() >= 0.0 and after.d_hat.max() <= 1.0

    def test_history_never_increases(self, textured):
        view, gt = textured
        views = build_pyramid(view, 2)
        state = RefineState(d_hat=depth_to_normalized_disparity(1.1 * gt))
        for _ in range(5):
            state = step(state, views, two_scale_weights())
        assert all(b <= a for a, b in zip(state.history, state.history[1:]))

    def test_non_finite_loss(self, textured):
        view, gt = textured
        broken = view.on_left.copy()
        broken[10, 10] = np.nan
        views = build_pyramid(replace(view, on_left=broken), 2)
        with pytest.raises(RefinementError, match="non-finite") as excinfo:
            step(RefineState(d_hat=depth_to_normalized_disparity(gt)), views, two_scale_weights())
        assert "total" in excinfo.value.components

    def test_rates_follow_gradient_signs(self):
        schedule = RefineSchedule(initial_step=0.004, max_step=0.01, grow=1.2, shrink=0.5)
        grad = np.array([1.0, -1.0, 2.0, 0.0])
        last = np.array([1.0, 1.0, -1.0, 0.0])
        rates, active = adapt_rates(grad, np.full(4, 0.004), last, schedule)
        np.testing.assert_allclose(rates, [0.0048, 0.002, 0.002, 0.004])
        np.testing.assert_array_equal(active, [1.0, 0.0, 0.0, 0.0])

    def test_rates_capped_and_initialized(self):
        schedule = RefineSchedule(initial_step=0.002, max_step=0.003)
        rates, active = adapt_rates(np.ones(3), None, None, schedule)
        np.testing.assert_array_equal(rates, 0.002)
        rates, _ = adapt_rates(np.ones(3), np.full(3, 0.0029), np.ones(3), schedule)
        np.testing.assert_array_equal(rates, 0.003)

    def test_all_flipped_moves_along_gradient(self):
        grad = np.array([1.0, -1.0])
        _, active = adapt_rates(grad, None, -grad, RefineSchedule())
        np.testing.assert_array_equal(active, grad)

    def test_direction_clipped_at_quantile(self):
        grad = np.array([0.0, 1.0, 2.0, 3.0, -4.0])
        direction = descent_direction(grad, np.ones(5), clip_quantile=0.5)
        np.testing.assert_allclose(direction, [0.0, -0.4, -0.8, -1.0, 1.0])

    def test_first_step_bounded_by_initial_rate(self, textured):
        view, gt = textured
        start = depth_to_normalized_disparity(1.1 * gt)
        state = step(RefineState(d_hat=start), build_pyramid(view, 2), two_scale_weights())
        moved = np.abs(state.d_hat - start)
        assert moved.max() <= RefineSchedule().initial_step + 1e-12
        assert state.rates is not None and state.last_grad is not None


class TestRun:
    def test_zero_iterations_returns_initialization(self, textured):
        view, gt = textured
        state = initialize(view.semi_dense, view.sparse, view.rig)
        result = run(state, build_pyramid(view, 2), two_scale_weights(), RefineSchedule((0, 0)))
        np.testing.assert_array_equal(result.d_hat, state.d_hat)
        assert result.records == []
        assert result.depth.valid.all()

    def test_records_decrease_within_each_level(self, textured):
        view, _ = textured
        state = initialize(view.semi_dense, view.sparse, view.rig)
        result = run(state, build_pyramid(view, 2), two_scale_weights(), RefineSchedule((4, 3)))
        for level in (0, 1):
            totals = [r["total"] for r in result.records if r["level"] == level]
            assert all(b <= a for a, b in zip(totals, totals[1:]))
        assert result.depth.valid_fraction == 1.0

    def test_deterministic(self, textured):
        view, _ = textured
        state = initialize(view.semi_dense, view.sparse, view.rig)
        views = build_pyramid(view, 2)
        first = run(state, views, two_scale_weights(), RefineSchedule((3, 2)))
        second = run(state, views, two_scale_weights(), RefineSchedule((3, 2)))
        np.testing.assert_array_equal(first.depth.image, second.depth.image)

    def test_needs_full_resolution_state(self, textured):
        view, gt = textured
        state = RefineState(d_hat=np.full((18, 24), 0.3), level=1)
        with pytest.raises(ValueError, match="full-resolution"):
            run(state, build_pyramid(view, 2), two_scale_weights())

    def test_upsample(self):
        coarse = np.full((3, 4), 0.25)
        fine = upsample(coarse, (6, 8))
        assert fine.shape == (6, 8)
        np.testing.assert_allclose(fine, 0.25)


class TestDepthRefiner:
    CONFIG = {
        "losses": {"n_scales": 2},
        "refine": {"iters_per_scale": [3, 2]},
        "logging": {"report_to": "none"},
    }

    def test_refine_and_save(self, textured, tmp_path):
        view, _ = textured
        result = DepthRefiner(config=self.CONFIG).refine(view)
        assert result.depth.valid.all()
        result.save(tmp_path)
        assert (tmp_path / "depth.pfm").exists()
        with open(tmp_path / "loss_components.json") as f:
            assert json.load(f)["total"] == pytest.approx(result.breakdown.total)
        with open(tmp_path / "loss_history.csv", newline="") as f:
            assert len(list(csv.DictReader(f))) == len(result.records)

    def test_wandb_tracking(self, textured, monkeypatch):
        logged = []
        finished = []
        run_handle = SimpleNamespace(log=logged.append, finish=lambda: finished.append(True))
        fake = SimpleNamespace(init=lambda **kwargs: run_handle)
        monkeypatch.setitem(sys.modules, "wandb", fake)
        config = {**self.CONFIG, "logging": {"report_to": "wandb", "project": "test"}}
        DepthRefiner(config=config).refine(textured[0])
        assert finished == [True]
        assert logged and all(key.startswith("level") for key in logged[0])


class TestAblation:
    def test_parse_variant(self):
        base = LossWeights()
        assert parse_variant("no_sparse", base).weights.w3 == 0.0
        assert parse_variant("no_temporal", base).weights.beta == 0.0
        assert parse_variant("sparse_fraction_0.25", base).sparse_fraction == 0.25
        assert parse_variant("full", base).weights == base

    @pytest.mark.parametrize("name", ["sparse_fraction_2", "sparse_fraction_x", "no_photo"])
    def test_bad_variant(self, name):
        with pytest.raises(ValueError):
            parse_variant(name, LossWeights())

    def test_run_ablation_rows(self):
        rig = StereoRig(Intrinsics.centered(32, 24, 24.0), 0.1)
        forward, sideways = np.array([0.0, 0.0, 1.0]), np.array([0.02, 0.0, 0.0])
        poses = linear_trajectory(np.zeros(3), forward, sideways, 3)
        sequence = generate_sequence(textured_wall(1.0), rig, poses, wall_pattern(rig))
        triplet = sequence.triplets[0]
        gt = triplet.gt_depth.image
        semi_dense = DepthMap.from_array(np.where(np.arange(32) % 2 == 0, gt, 0.0))
        landmarks = wall_landmarks(rig, gt, [(4, 4), (20, 6), (10, 18), (27, 20)])
        refiner = DepthRefiner(weights=LossWeights(n_scales=2), schedule=RefineSchedule((2, 1)))
        rows, results = run_ablation(
            triplet, rig, semi_dense, landmarks, refiner, far_threshold=0.5
        )
        assert set(results) == {"full", "no_sparse", "no_temporal", "sparse_fraction_0.5"}
        methods = {row["method"] for row in rows}
        assert methods == {"sgm_nearest_fill", *results}
        regions = {row["region"] for row in rows}
        assert regions == {"whole", "with_initial", "without_initial", "far", "occluded"}
        assert all(row["pct_valid"] == 100.0 for row in rows)


def rmse(depth, gt):
    initial = DepthMap.empty(gt.shape)
    return compute_metrics(depth, gt, initial)["whole"].rmse


@pytest.mark.slow
def test_blank_wall_with_pattern_beats_filled_sgm():
    view, gt = make_view(blank_wall(1.0), WALL_RIG, pattern=wall_pattern(WALL_RIG))
    semi_dense = sgm_depth(view.on_left, view.on_right, WALL_RIG, SgmParams(d_max=16))
    pixels = [(6, 6), (40, 8), (24, 18), (8, 30), (42, 29)]
    sparse = rasterize(wall_landmarks(WALL_RIG, gt, pixels), WALL_RIG, view.pose_t).image
    view = replace(view, semi_dense=semi_dense, sparse=sparse)
    refiner = DepthRefiner(weights=LossWeights(n_scales=3), schedule=RefineSchedule((20, 15, 10)))
    result = refiner.refine(view)
    truth = DepthMap.from_array(gt)
    assert rmse(result.depth, truth) < rmse(nearest_fill(semi_dense), truth)


def floor_mask(gt, rig, height=1.8):
    """Pixels whose ground-truth point lies on the horizontal floor ``height`` below the camera."""
    _, y_ray = rig.intrinsics.rays()
    return gt.valid & (np.abs(y_ray * gt.image - height) < 0.01)


@pytest.fixture(scope="module")
def occluded_floor():
    config = load_config(BENCHMARK_CONFIG)
    sequence, rig, _ = synthesize(config, occluded_floor_scene(), None, None, seed=0, workers=2)
    triplet = sequence.triplets[0]
    semi_dense = compute_sgm(triplet.t, rig, config, workers=2)
    landmarks = compute_landmarks(sequence, rig, config, workers=2)
    return config, triplet, rig, semi_dense, landmarks


@pytest.fixture(scope="module")
def occluded_floor_ablation(occluded_floor):
    config, triplet, rig, semi_dense, landmarks = occluded_floor
    rows, results = run_ablation(
        triplet,
        rig,
        semi_dense,
        landmarks,
        DepthRefiner(config=config),
        variants=("full", "no_sparse", "no_temporal"),
        far_threshold=5.0,
    )
    return {(row["method"], row["region"]): row for row in rows}, results


@pytest.mark.slow
def test_occluded_floor_benchmark_setup(occluded_floor):
    _, triplet, rig, semi_dense, landmarks = occluded_floor
    assert rig.intrinsics.shape == (120, 160)
    floor = floor_mask(triplet.gt_depth, rig)
    assert floor.sum() > 1000
    assert (semi_dense.valid & floor).sum() < 0.05 * floor.sum()
    sparse = rasterize(landmarks, rig, triplet.t.pose)
    assert len(landmarks) >= 20
    assert (sparse.image > 0)[floor].any()


@pytest.mark.slow
def test_completion_beats_filled_sgm(occluded_floor_ablation):
    table, _ = occluded_floor_ablation
    full, baseline = "full", "sgm_nearest_fill"
    assert table[full, "whole"]["pct_valid"] == 100.0
    assert table[full, "whole"]["rel"] < table[baseline, "whole"]["rel"]
    assert (
        table[full, "without_initial"]["rmse"] <= 0.75 * table[baseline, "without_initial"]["rmse"]
    )


@pytest.mark.slow
def test_floor_without_initial_depth(occluded_floor, occluded_floor_ablation):
    _, triplet, rig, semi_dense, _ = occluded_floor
    _, results = occluded_floor_ablation
    floor = floor_mask(triplet.gt_depth, rig) & ~semi_dense.valid
    depth = results["full"].depth
    reports = compute_metrics(depth, triplet.gt_depth, semi_dense, {"floor": floor})
    assert reports["floor"].count > 0
    assert reports["floor"].rel < 0.15


@pytest.mark.slow
def test_sparse_loss_helps_far_region(occluded_floor_ablation):
    table, _ = occluded_floor_ablation
    assert table["full", "far"]["count"] > 0
    assert table["full", "far"]["rmse"] < table["no_sparse", "far"]["rmse"]


@pytest.mark.slow
def test_temporal_terms_help_occluded_region(occluded_floor_ablation):
    table, _ = occluded_floor_ablation
    assert table["full", "occluded"]["count"] > 0
    assert table["no_temporal", "occluded"]["rel"] > table["full", "occluded"]["rel"]
