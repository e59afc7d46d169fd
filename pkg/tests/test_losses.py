"""Tests for the photometric, supervision and multi-scale loss terms."""

from dataclasses import replace

import numpy as np
import pytest

from helmholtz import autodiff as ad
from helmholtz.autodiff import Tape
from helmholtz.geometry import DepthMap, Intrinsics, Pose, StereoRig
from helmholtz.geometry.camera import depth_to_normalized_disparity, normalized_disparity_to_depth
from helmholtz.losses import (
    OFF_NAMES,
    LossWeights,
    PhotoMap,
    TripletView,
    auto_mask,
    build_pyramid,
    disparity_pyramid,
    edge_weights,
    gamma_loss,
    identity_losses,
    off_losses,
    off_minimum,
    pe,
    photo_combined,
    photo_full_min,
    rescale_sparse,
    sd_loss,
    smooth_loss,
    sparse_loss,
    stereo_on_loss,
    total_loss,
    valid_pool2,
)
from helmholtz.simulation import jittered_grid, splat_blobs
from helmholtz.simulation.scenes import blank_wall, textured_wall

from conftest import WALL_RIG as RIG
from conftest import make_view, numeric_gradient, relative_error, wall_pattern


def constant_map(value, shape=(4, 4), valid=True):
    return PhotoMap(np.full(shape, float(value)), np.full(shape, valid))


def on_value(view, depth):
    return float(ad.value_of(stereo_on_loss(view, depth)[1]))


class TestPe:
    def test_identical_images(self, rng):
        image = rng.uniform(size=(10, 12))
        loss_map, scalar = pe(image, image)
        np.testing.assert_allclose(loss_map, 0.0, atol=1e-12)
        assert scalar == pytest.approx(0.0, abs=1e-12)

    def test_constant_images(self):
        loss_map, scalar = pe(np.ones((6, 6)), np.zeros((6, 6)))
        c1 = 1e-4
        expected = 0.85 * (1.0 - c1 / (1.0 + c1)) / 2.0 + 0.15
        np.testing.assert_allclose(loss_map, expected, rtol=1e-9)
        assert float(scalar) == pytest.approx(0.5749, abs=1e-4)

    def test_masked_mean(self, rng):
        target, warped = rng.uniform(size=(2, 8, 8))
        valid = np.zeros((8, 8), dtype=bool)
        valid[2:5, 3:6] = True
        loss_map, scalar = pe(target, warped, valid)
        assert float(scalar) == pytest.approx(loss_map[valid].mean())

    def test_empty_mask(self, rng):
        target, warped = rng.uniform(size=(2, 8, 8))
        assert float(pe(target, warped, np.zeros((8, 8), dtype=bool))[1]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="differ in shape"):
            pe(np.zeros((4, 4)), np.zeros((4, 5)))


class TestStereoOn:
    def test_textured_minimum_at_ground_truth(self):
        view, gt = make_view(textured_wall(1.0, seed=3))
        assert on_value(view, gt) < on_value(view, 1.5 * gt)

    def test_blank_wall_without_pattern_is_flat(self):
        view, gt = make_view(blank_wall(1.0))
        assert on_value(view, gt) < 1e-3
        assert abs(on_value(view, gt) - on_value(view, 1.1 * gt)) < 1e-3

    def test_blank_wall_with_pattern_has_signal(self):
        view, gt = make_view(blank_wall(1.0), pattern=wall_pattern(RIG))
        assert on_value(view, gt) < on_value(view, 1.1 * gt)


class TestOff:
    def test_static_identical_frames(self, rng):
        image = rng.uniform(size=RIG.intrinsics.shape)
        pose = Pose.identity()
        empty = DepthMap.empty(RIG.intrinsics.shape)
        view = TripletView(RIG, *[image] * 6, pose, pose, pose, empty, np.zeros(empty.shape))
        maps = off_losses(view, np.full(RIG.intrinsics.shape, 1.0))
        assert set(maps) == set(OFF_NAMES)
        for name in ("temp_L", "temp_R"):
            np.testing.assert_allclose(maps[name].value[maps[name].valid], 0.0, atol=1e-12)
        # Identity errors are zero as well, so the strict comparison rejects everything.
        assert not auto_mask(maps, identity_losses(view)).any()

    def test_ground_truth_beats_wrong_depth(self):
        view, gt = make_view(textured_wall(1.0, seed=4))
        at_gt = off_losses(view, gt)
        wrong = off_losses(view, 1.2 * gt)
        for name in OFF_NAMES:
            good, bad = at_gt[name], wrong[name]
            assert good.value[good.valid].mean() < bad.value[bad.valid].mean()

    def test_auto_mask_keeps_moving_texture(self):
        view, gt = make_view(textured_wall(1.0, seed=4))
        mask = auto_mask(off_losses(view, gt), identity_losses(view))
        assert mask[6:-6, 6:-6].mean() > 0.5

    def test_off_minimum(self):
        off = {name: constant_map(v) for name, v in zip(OFF_NAMES, (0.4, 0.2, 0.9, 0.3))}
        minimum, keep = off_minimum(off, np.ones((4, 4), dtype=bool))
        np.testing.assert_allclose(ad.value_of(minimum), 0.2)
        assert keep.all()

    def test_off_minimum_skips_invalid_maps(self):
        values = (0.4, 0.2, 0.9, 0.3)
        off = {name: constant_map(v, valid=v != 0.2) for name, v in zip(OFF_NAMES, values)}
        minimum, _ = off_minimum(off, np.ones((4, 4), dtype=bool))
        np.testing.assert_allclose(ad.value_of(minimum), 0.3)


class TestCombined:
    def setup_method(self):
        self.on = constant_map(0.1)
        self.off = {name: constant_map(v) for name, v in zip(OFF_NAMES, (0.4, 0.2, 0.9, 0.3))}

    def test_split_sum(self):
        combined = photo_combined(self.on, self.off, np.ones((4, 4), dtype=bool), beta=1.0)
        assert float(ad.value_of(combined)) == pytest.approx(0.3)

    def test_beta_zero(self):
        combined = photo_combined(self.on, self.off, np.ones((4, 4), dtype=bool), beta=0.0)
        assert float(ad.value_of(combined)) == pytest.approx(0.1)

    def test_negative_beta(self):
        with pytest.raises(ValueError, match="beta"):
            photo_combined(self.on, self.off, np.ones((4, 4), dtype=bool), beta=-1.0)

    def test_masked_pixels_do_not_matter(self):
        mask = np.ones((4, 4), dtype=bool)
        mask[0, 0] = False
        before = float(ad.value_of(photo_combined(self.on, self.off, mask)))
        for photo_map in self.off.values():
            photo_map.loss[0, 0] = 0.0
        after = float(ad.value_of(photo_combined(self.on, self.off, mask)))
        assert after == pytest.approx(before, abs=1e-12)

    def test_full_min_takes_smallest_of_five(self):
        assert float(ad.value_of(photo_full_min(self.on, self.off))) == pytest.approx(0.1)

    def test_split_keeps_active_signal_on_blank_wall(self):
        view, gt = make_view(blank_wall(1.0), pattern=wall_pattern(RIG))
        d_hat = depth_to_normalized_disparity(1.05 * gt)

        def gradient_norm(full_min: bool) -> float:
            tape = Tape()
            leaf = tape.leaf(d_hat, "d_hat")
            depth = normalized_disparity_to_depth(leaf)
            on_map, _ = stereo_on_loss(view, depth)
            off = off_losses(view, depth)
            mask = auto_mask(off, identity_losses(view))
            if full_min:
                loss = photo_full_min(on_map, off)
            else:
                loss = photo_combined(on_map, off, mask)
            return float(np.linalg.norm(tape.backward(loss)[leaf]))

        assert gradient_norm(False) >= 10.0 * gradient_norm(True)


class TestSupervision:
    def test_sd_exact(self):
        semi_dense = DepthMap.from_array(np.full((3, 3), 2.0))
        assert float(ad.value_of(sd_loss(np.full((3, 3), 2.0), semi_dense))) == 0.0

    def test_sd_single_pixel(self):
        image = np.zeros((3, 3))
        image[1, 1] = 2.0
        depth = np.full((3, 3), 3.0)
        assert float(ad.value_of(sd_loss(depth, DepthMap.from_array(image)))) == pytest.approx(0.25)

    def test_sd_far_pixels_weigh_less(self):
        image = np.zeros((3, 3))
        image[0, 0] = 10.0
        depth = np.full((3, 3), 11.0)
        assert float(ad.value_of(sd_loss(depth, DepthMap.from_array(image)))) == pytest.approx(0.01)

    def test_sd_empty(self):
        assert float(ad.value_of(sd_loss(np.ones((3, 3)), DepthMap.empty((3, 3))))) == 0.0

    def test_sparse_mean_error(self):
        sparse = np.zeros((4, 4))
        sparse[0, 1], sparse[2, 3] = 2.0, 3.0
        depth = np.full((4, 4), 99.0)
        depth[0, 1], depth[2, 3] = 2.5, 1.5
        assert float(ad.value_of(sparse_loss(depth, sparse))) == pytest.approx(1.0)

    def test_sparse_empty(self):
        assert float(ad.value_of(sparse_loss(np.ones((4, 4)), np.zeros((4, 4))))) == 0.0

    def test_smooth_constant(self, rng):
        loss = smooth_loss(np.full((12, 12), 0.4), rng.uniform(size=(12, 12)))
        assert float(ad.value_of(loss)) == 0.0

    def test_smooth_step_cheaper_across_edge(self):
        disparity = np.full((20, 20), 0.2)
        disparity[:, 10:] = 0.4
        edge = np.zeros((20, 20))
        edge[:, 10:] = 3.0
        across = float(ad.value_of(smooth_loss(disparity, edge)))
        flat = float(ad.value_of(smooth_loss(disparity, np.zeros((20, 20)))))
        assert across == pytest.approx(flat * np.exp(-3.0))
        assert across < flat

    def test_median_removes_pattern(self):
        plain = np.full((40, 40), 0.5)
        pixels = jittered_grid(40, 40, 12.0, 1.0, seed=2)
        dotted = plain + splat_blobs(plain.shape, pixels, np.full(len(pixels), 0.4), 0.8)
        for with_dots, without in zip(edge_weights(dotted), edge_weights(plain)):
            np.testing.assert_allclose(with_dots, without, atol=1e-6)

    def test_smooth_zero_mean(self):
        with pytest.raises(ValueError, match="non-zero mean"):
            smooth_loss(np.zeros((5, 5)), np.zeros((5, 5)))

    @pytest.mark.parametrize(
        "gammas, expected",
        [
            ([np.array([0.1, -0.2])], 0.3),
            ([np.zeros(4)], 0.0),
            ([np.array([1.0]), np.array([-1.0])], 2.0),
        ],
    )
    def test_gamma(self, gammas, expected):
        assert float(ad.value_of(gamma_loss(gammas))) == pytest.approx(expected)


class TestPyramid:
    def test_valid_pool_averages_valid_only(self):
        image = np.array([[2.0, 4.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        pooled = valid_pool2(DepthMap.from_array(image))
        np.testing.assert_allclose(pooled.image, [[3.0, 0.0]])
        np.testing.assert_array_equal(pooled.valid, [[True, False]])

    def test_rescale_sparse_keeps_nearest(self):
        sparse = np.zeros((4, 4))
        sparse[2, 2], sparse[3, 3] = 3.0, 2.0
        rescaled = rescale_sparse(sparse)
        assert rescaled.shape == (2, 2)
        assert rescaled[1, 1] == 2.0
        assert np.count_nonzero(rescaled) == 1

    def test_levels_halve(self):
        view, _ = make_view(textured_wall(1.0))
        levels = build_pyramid(view, 3)
        assert [lvl.shape for lvl in levels] == [(36, 48), (18, 24), (9, 12)]
        assert [lvl.level for lvl in levels] == [0, 1, 2]
        assert levels[1].rig.intrinsics.fx == pytest.approx(18.0)

    def test_disparity_pyramid(self):
        levels = disparity_pyramid(np.arange(16.0).reshape(4, 4) / 16.0, 2)
        expected = np.array([[2.5, 4.5], [10.5, 12.5]]) / 16.0
        np.testing.assert_allclose(ad.value_of(levels[1]), expected)


class TestTotal:
    def setup_method(self):
        self.view, gt = make_view(textured_wall(1.0, seed=6), step=0.03)
        self.d_hat = depth_to_normalized_disparity(gt)

    def test_weights_validation(self):
        with pytest.raises(ValueError, match="non-negative"):
            LossWeights(w2=-1.0)
        with pytest.raises(ValueError, match="alpha_pe"):
            LossWeights(alpha_pe=1.5)

    def test_weights_from_config(self):
        weights = LossWeights.from_config({"w1": 2, "n_scales": 3})
        assert weights.w1 == 2.0
        assert weights.n_scales == 3
        assert weights.w5 == pytest.approx(2e-6)

    def test_scale_count_checked(self):
        views = build_pyramid(self.view, 2)
        with pytest.raises(ValueError, match="pyramid covers"):
            total_loss(views, disparity_pyramid(self.d_hat, 2), LossWeights(n_scales=3))

    def test_total_matches_components(self):
        weights = LossWeights(n_scales=2)
        views = build_pyramid(self.view, 2)
        disparities = disparity_pyramid(self.d_hat, 2)
        breakdown = total_loss(views, disparities, weights, gammas=[np.array([0.5, -0.5])])
        expected = (
            weights.w1 * breakdown.photo
            + weights.w2 * breakdown.sd
            + weights.w3 * breakdown.sparse
            + weights.w4 * breakdown.smooth
            + weights.w5 * breakdown.gamma
        )
        assert breakdown.total == pytest.approx(expected, abs=1e-10)
        assert float(ad.value_of(breakdown.objective)) == pytest.approx(breakdown.total, abs=1e-10)
        assert breakdown.gamma == pytest.approx(1.0)
        assert set(breakdown.maps) >= {"stereo_on", "off_min", *OFF_NAMES}

    def test_inverse_square_scale_weights(self):
        weights = LossWeights(w1=1.0, w2=0.0, w3=0.0, w4=0.0, w5=0.0, n_scales=2)
        views = build_pyramid(self.view, 2)
        disparities = disparity_pyramid(self.d_hat, 2)
        per_level = []
        for view, d_hat in zip(views, disparities):
            depth = normalized_disparity_to_depth(d_hat)
            on_map, _ = stereo_on_loss(view, depth)
            off = off_losses(view, depth)
            mask = auto_mask(off, identity_losses(view))
            per_level.append(float(ad.value_of(photo_combined(on_map, off, mask))))
        breakdown = total_loss(views, disparities, weights)
        assert breakdown.total == pytest.approx(per_level[0] + per_level[1] / 4.0, rel=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        rig = StereoRig(Intrinsics.centered(16, 12, 10.0), 0.1)
        scene = textured_wall(rng.uniform(0.8, 1.5), seed=seed)
        view, gt = make_view(scene, rig=rig, step=0.1)
        semi_dense = np.where(rng.uniform(size=gt.shape) < 0.5, gt * 1.1, 0.0)
        sparse = np.zeros(gt.shape)
        sparse[4, 5], sparse[7, 9] = 0.95, 1.05
        view = replace(view, semi_dense=DepthMap.from_array(semi_dense), sparse=sparse)
        weights = LossWeights(beta=rng.uniform(0.5, 2.0), n_scales=2)
        views = build_pyramid(view, 2)
        d_hat = depth_to_normalized_disparity(gt) + rng.uniform(-0.01, 0.01, gt.shape)
        temporal = total_loss(views, disparity_pyramid(d_hat, 2), weights).total
        stereo_only = total_loss(views, disparity_pyramid(d_hat, 2), replace(weights, beta=0.0))
        assert temporal > stereo_only.total

        def objective(x):
            return total_loss(views, disparity_pyramid(x, 2), weights).objective

        tape = Tape()
        leaf = tape.leaf(d_hat, "d_hat")
        analytic = tape.backward(objective(leaf))[leaf]
        numeric = numeric_gradient(lambda x: float(ad.value_of(objective(x))), d_hat, h=1e-5)
        assert relative_error(analytic, numeric) <= 1e-3
