"""Pinhole camera model with optional two-term radial distortion."""

from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import BehindCameraError

MIN_DEPTH_M = 1e-9
VISIBILITY_MIN_DEPTH_M = 0.05


class PixelPoint(NamedTuple):
    """Pixel coordinates on the image plane."""

    u: float
    v: float


class CameraIntrinsics(BaseModel):
    """Pinhole intrinsics; never estimated, always supplied."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fx: float = Field(gt=0, description="Focal length along u, pixels")
    fy: float = Field(gt=0, description="Focal length along v, pixels")
    cx: float = Field(description="Principal point u, pixels")
    cy: float = Field(description="Principal point v, pixels")
    width: int = Field(gt=0, description="Image width, pixels")
    height: int = Field(gt=0, description="Image height, pixels")
    k1: float = Field(default=0.0, description="Radial distortion r^2 coefficient")
    k2: float = Field(default=0.0, description="Radial distortion r^4 coefficient")

    @model_validator(mode="after")
    def _principal_point_inside(self) -> "CameraIntrinsics":
        if not (0.0 <= self.cx <= self.width and 0.0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")
        return self

    @classmethod
    def create_default(cls) -> "CameraIntrinsics":
        """640x480 camera with roughly 60 degrees of horizontal field of view."""
        return cls(fx=554.26, fy=554.26, cx=320.0, cy=240.0, width=640, height=480)

    @property
    def has_distortion(self) -> bool:
        return self.k1 != 0.0 or self.k2 != 0.0

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def _check_depth(points: np.ndarray) -> None:
    if np.any(points[:, 2] <= MIN_DEPTH_M):
        worst = float(points[:, 2].min())
        raise BehindCameraError(f"Point depth {worst:.3e} m is not in front of camera")


def project_points(cam: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Project (N, 3) camera-frame points to (N, 2) pixels.

    Raises:
        BehindCameraError: any point with z <= 1e-9 m.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_depth(points)
    xn = points[:, 0] / points[:, 2]
    yn = points[:, 1] / points[:, 2]
    if cam.has_distortion:
        r2 = xn * xn + yn * yn
        factor = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2
        xn = xn * factor
        yn = yn * factor
    return np.column_stack([cam.fx * xn + cam.cx, cam.fy * yn + cam.cy])


def project(cam: CameraIntrinsics, p: np.ndarray) -> PixelPoint:
    """Project a single camera-frame point."""
    u, v = project_points(cam, np.asarray(p, dtype=float).reshape(1, 3))[0]
    return PixelPoint(float(u), float(v))


def projection_jacobian(cam: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """(N, 2, 3) derivatives of projected pixels w.r.t. camera-frame points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_depth(points)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    inv_z = 1.0 / z
    xn, yn = x * inv_z, y * inv_z

    # d(xn, yn) / d(x, y, z)
    dn = np.zeros((points.shape[0], 2, 3))
    dn[:, 0, 0] = inv_z
    dn[:, 0, 2] = -xn * inv_z
    dn[:, 1, 1] = inv_z
    dn[:, 1, 2] = -yn * inv_z

    # d(distorted) / d(xn, yn)
    dd = np.zeros((points.shape[0], 2, 2))
    if cam.has_distortion:
        r2 = xn * xn + yn * yn
        factor = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2
        dfactor = cam.k1 + 2.0 * cam.k2 * r2
        dd[:, 0, 0] = factor + 2.0 * xn * xn * dfactor
        dd[:, 0, 1] = 2.0 * xn * yn * dfactor
        dd[:, 1, 0] = 2.0 * xn * yn * dfactor
        dd[:, 1, 1] = factor + 2.0 * yn * yn * dfactor
    else:
        dd[:, 0, 0] = 1.0
        dd[:, 1, 1] = 1.0

    focal = np.array([cam.fx, cam.fy])[None, :, None]
    return focal * np.einsum("nij,njk->nik", dd, dn)


def undistort_normalized(
    cam: CameraIntrinsics, pixels: np.ndarray, iterations: int = 20
) -> np.ndarray:
    """Invert the pixel model to (N, 2) normalized undistorted coordinates."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    xd = (pixels[:, 0] - cam.cx) / cam.fx
    yd = (pixels[:, 1] - cam.cy) / cam.fy
    if not cam.has_distortion:
        return np.column_stack([xd, yd])
    xn, yn = xd.copy(), yd.copy()
    for _ in range(iterations):
        r2 = xn * xn + yn * yn
        factor = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2
        xn, yn = xd / factor, yd / factor
    return np.column_stack([xn, yn])


def is_visible(cam: CameraIntrinsics, p: np.ndarray) -> bool:
    """True iff the point is at least 5 cm in front and projects inside the image."""
    p = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)) or p[2] <= VISIBILITY_MIN_DEPTH_M:
        return False
    u, v = project(cam, p)
    return bool(0.0 <= u <= cam.width and 0.0 <= v <= cam.height)


def visible_mask(cam: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Vectorized is_visible over (N, 3) points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mask = points[:, 2] > VISIBILITY_MIN_DEPTH_M
    if not np.any(mask):
        return mask
    pixels = project_points(cam, points[mask])
    inside = (
        (pixels[:, 0] >= 0.0)
        & (pixels[:, 0] <= cam.width)
        & (pixels[:, 1] >= 0.0)
        & (pixels[:, 1] <= cam.height)
    )
    out = np.zeros(points.shape[0], dtype=bool)
    out[np.flatnonzero(mask)] = inside
    return out
