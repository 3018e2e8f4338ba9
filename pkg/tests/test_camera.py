"""Test cases for the pinhole camera model."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dccal.core.errors import BehindCameraError
from dccal.model.camera import (
    CameraIntrinsics,
    is_visible,
    project,
    project_points,
    projection_jacobian,
    undistort_normalized,
    visible_mask,
)


class TestProjection:
    """Test pixel projection."""

    def test_optical_axis_hits_principal_point(self, camera):
        u, v = project(camera, np.array([0.0, 0.0, 2.0]))
        assert (u, v) == (camera.cx, camera.cy)

    def test_known_projection(self, camera):
        pixels = project_points(camera, np.array([[0.1, -0.2, 1.0]]))
        assert_allclose(pixels, [[320.0 + 55.426, 240.0 - 110.852]], atol=1e-9)

    def test_behind_camera_raises(self, camera):
        with pytest.raises(BehindCameraError):
            project(camera, np.array([0.0, 0.0, -1.0]))
        with pytest.raises(BehindCameraError):
            project(camera, np.array([0.1, 0.1, 0.0]))

    @pytest.mark.parametrize("k1,k2", [(0.0, 0.0), (-0.2, 0.05)])
    def test_jacobian_matches_finite_differences(self, rng, k1, k2):
        cam = CameraIntrinsics(
            fx=500.0, fy=510.0, cx=320.0, cy=240.0, width=640, height=480, k1=k1, k2=k2
        )
        points = np.column_stack(
            [
                rng.uniform(-0.5, 0.5, 10),
                rng.uniform(-0.5, 0.5, 10),
                rng.uniform(1, 3, 10),
            ]
        )
        analytic = projection_jacobian(cam, points)
        step = 1e-7
        for axis in range(3):
            delta = np.zeros(3)
            delta[axis] = step
            forward = project_points(cam, points + delta)
            backward = project_points(cam, points - delta)
            numeric = (forward - backward) / (2 * step)
            assert_allclose(analytic[:, :, axis], numeric, rtol=1e-5, atol=1e-4)

    def test_undistort_inverts_distortion(self):
        cam = CameraIntrinsics(
            fx=500.0,
            fy=500.0,
            cx=320.0,
            cy=240.0,
            width=640,
            height=480,
            k1=-0.1,
            k2=0.01,
        )
        points = np.array([[0.2, -0.1, 1.0], [-0.3, 0.25, 1.0]])
        pixels = project_points(cam, points)
        assert_allclose(undistort_normalized(cam, pixels), points[:, :2], atol=1e-9)


class TestIntrinsics:
    """Test intrinsics validation."""

    def test_principal_point_must_be_inside(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=500, fy=500, cx=700, cy=240, width=640, height=480)

    def test_focal_length_positive(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0, fy=500, cx=320, cy=240, width=640, height=480)

    def test_matrix(self, camera):
        k = camera.matrix
        assert k[0, 0] == camera.fx and k[1, 2] == camera.cy and k[2, 2] == 1.0


class TestVisibility:
    """Test the visibility predicate."""

    def test_point_in_front_is_visible(self, camera):
        assert is_visible(camera, np.array([0.0, 0.0, 1.0]))

    def test_too_close_or_outside(self, camera):
        assert not is_visible(camera, np.array([0.0, 0.0, 0.01]))
        assert not is_visible(camera, np.array([5.0, 0.0, 1.0]))
        assert not is_visible(camera, np.array([0.0, 0.0, -1.0]))

    def test_mask_matches_predicate(self, camera, rng):
        points = np.column_stack(
            [rng.uniform(-2, 2, 50), rng.uniform(-2, 2, 50), rng.uniform(-1, 3, 50)]
        )
        expected = [is_visible(camera, p) for p in points]
        assert visible_mask(camera, points).tolist() == expected
