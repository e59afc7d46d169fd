"""Tests for feature detection, stereo triangulation, tracking and rasterization."""

from types import SimpleNamespace

import numpy as np
import pytest

from helmholtz.geometry import Intrinsics, Pose, StereoRig
from helmholtz.landmarks import (
    Landmark,
    Observation,
    TrackerParams,
    detect_features,
    match_stereo,
    rasterize,
    read_landmarks,
    subsample_landmarks,
    triangulate_and_track,
    write_landmarks,
)
from helmholtz.landmarks.tracking import FrameFeatures, LandmarkTracker, project_point
from helmholtz.simulation import render_passive, splat_blobs
from helmholtz.simulation.scenes import textured_wall


@pytest.fixture
def rig():
    return StereoRig(Intrinsics.centered(33, 25, 30.0), 0.1)


def exact_features(rig, frame_id, pose, points, pixel_offset=(0.0, 0.0)):
    """Noise-free stereo observations of world ``points`` seen from ``pose``."""
    points = np.atleast_2d(points)
    uv, z = project_point(rig, pose, points)
    disparity = rig.intrinsics.fx * rig.baseline / z
    return FrameFeatures(frame_id, pose, uv + np.asarray(pixel_offset), disparity, points)


def landmark_at(position, landmark_id=0):
    observations = [Observation(0, (0.0, 0.0), 1.0), Observation(2, (0.0, 0.0), 1.0)]
    return Landmark(landmark_id, np.asarray(position, dtype=float), observations)


class TestDetect:
    def test_constant_image(self):
        assert len(detect_features(np.full((20, 20), 0.5))) == 0

    def test_single_blob(self):
        image = splat_blobs((24, 32), np.array([[12.0, 10.0]]), np.array([1.0]), 1.2)
        points = detect_features(image, TrackerParams(relative_threshold=0.3))
        assert len(points) >= 1
        assert np.hypot(points[0, 0] - 12.0, points[0, 1] - 10.0) <= 1.0

    def test_cap(self, rng):
        image = rng.uniform(size=(48, 64))
        assert len(detect_features(image, TrackerParams(max_features=10))) == 10


class TestStereo:
    def test_match_recovers_disparity(self, rng):
        left = rng.uniform(size=(30, 60))
        right = np.roll(left, -5, axis=1)
        points = np.array([[30.0, 15.0], [40.0, 10.0]])
        match = match_stereo(left, right, points, TrackerParams(d_max=12))
        np.testing.assert_allclose(match.disparity, 5.0, atol=0.5)
        assert np.all(match.score > 0.99)

    def test_flat_patch_dropped(self):
        image = np.full((30, 60), 0.3)
        match = match_stereo(image, image, np.array([[30.0, 15.0]]))
        assert len(match.disparity) == 0


class TestTracking:
    def test_two_exact_frames(self, rig):
        point = np.array([0.1, 0.05, 2.0])
        tracker = LandmarkTracker(rig)
        tracker.add_frame(exact_features(rig, 0, Pose.identity(), point))
        moved = exact_features(rig, 2, Pose.from_translation(-0.05, 0.0, 0.0), point)
        assert tracker.add_frame(moved) == 1
        landmarks = tracker.landmarks()
        assert len(landmarks) == 1
        assert landmarks[0].track_length == 2
        np.testing.assert_allclose(landmarks[0].position, point, atol=1e-6)

    def test_single_sighting_excluded(self, rig):
        tracker = LandmarkTracker(rig)
        tracker.add_frame(exact_features(rig, 0, Pose.identity(), [0.1, 0.05, 2.0]))
        tracker.add_frame(exact_features(rig, 2, Pose.identity(), [-0.3, -0.1, 2.0]))
        assert tracker.landmarks() == []

    def test_inconsistent_sighting_rejected(self, rig):
        params = TrackerParams(association_gate=5.0, reproj_tol=1.0)
        point = np.array([0.0, 0.0, 2.0])
        tracker = LandmarkTracker(rig, params)
        tracker.add_frame(exact_features(rig, 0, Pose.identity(), point))
        decoy = exact_features(rig, 2, Pose.from_translation(-0.05, 0.0, 0.0), point, (0.0, 4.0))
        assert tracker.add_frame(decoy) == 1
        assert tracker.landmarks() == []

    def test_duplicate_frame(self, rig):
        tracker = LandmarkTracker(rig)
        features = exact_features(rig, 0, Pose.identity(), [0.0, 0.0, 2.0])
        tracker.add_frame(features)
        with pytest.raises(ValueError, match="already added"):
            tracker.add_frame(features)

    def test_needs_two_frames(self, rig):
        with pytest.raises(ValueError, match="at least 2"):
            triangulate_and_track([], rig)

    def test_landmark_needs_two_observations(self):
        with pytest.raises(ValueError, match="need >= 2"):
            Landmark(0, np.zeros(3), [Observation(0, (1.0, 1.0), 1.0)])

    def test_rendered_wall_agrees_with_ground_truth(self):
        rig = StereoRig(Intrinsics.centered(64, 48, 48.0), 0.1)
        scene = textured_wall(0.5, seed=2)
        frames = []
        for index in (0, 2, 4):
            pose = Pose.from_translation(-0.01 * index, 0.0, 0.0)
            view = render_passive(scene, rig, pose)
            left, right = view.left.image, view.right.image
            frames.append(SimpleNamespace(index=index, left=left, right=right, pose=pose))
        landmarks = triangulate_and_track(frames, rig, TrackerParams(d_max=20), workers=2)
        assert len(landmarks) > 5
        sparse = rasterize(landmarks, rig, frames[1].pose)
        assert sparse.count > 0
        depths = sparse.image[sparse.valid]
        assert abs(np.median(depths) - 0.5) <= 0.005
        np.testing.assert_allclose(depths, 0.5, rtol=0.03)


class TestRasterize:
    def test_principal_axis(self, rig):
        sparse = rasterize([landmark_at([0.0, 0.0, 2.0])], rig, Pose.identity())
        assert sparse.count == 1
        assert sparse.image[12, 16] == 2.0

    def test_behind_camera(self, rig):
        assert rasterize([landmark_at([0.0, 0.0, -2.0])], rig, Pose.identity()).count == 0

    def test_nearest_wins(self, rig):
        landmarks = [landmark_at([0.0, 0.0, 3.0], 0), landmark_at([0.0, 0.0, 2.0], 1)]
        assert rasterize(landmarks, rig, Pose.identity()).image[12, 16] == 2.0

    def test_subsample_is_subset(self, rig, rng):
        offsets = rng.uniform(-0.8, 0.8, (40, 2))
        landmarks = [landmark_at([x, y, 2.0], i) for i, (x, y) in enumerate(offsets)]
        full = rasterize(landmarks, rig, Pose.identity())
        half = subsample_landmarks(landmarks, 0.5, seed=3)
        assert len(half) == 20
        partial = rasterize(half, rig, Pose.identity())
        assert np.all(full.valid[partial.valid])

    def test_subsample_fraction_range(self):
        with pytest.raises(ValueError, match="fraction"):
            subsample_landmarks([], 1.5)


def test_landmark_json_roundtrip(tmp_path):
    landmarks = [landmark_at([0.1, 0.2, 2.0], 0), landmark_at([0.3, -0.2, 1.5], 1)]
    write_landmarks(tmp_path / "landmarks.json", landmarks)
    again = read_landmarks(tmp_path / "landmarks.json")
    assert [lm.id for lm in again] == [0, 1]
    assert [lm.track_length for lm in again] == [2, 2]
    np.testing.assert_array_equal(again[1].position, [0.3, -0.2, 1.5])
