"""Planar poses, rigid 3D transforms, point clouds and grid/world conversion.

Point clouds are plain ``(m, 3)`` float64 numpy arrays throughout the
package; a single 3D point is any length-3 sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfBoundsError

_ORTHO_TOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2D:
    """Planar robot pose: x, y in meters, heading theta in radians.

    theta is wrapped to (-pi, pi] at construction so poses compare cleanly.
    """

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Transform3D:
    """Rigid transform: p_out = rotation @ p_in + translation.

    rotation must be orthonormal with determinant +1 (checked to 1e-9).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite transform")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (max |R'R - I| = {err:.3e})")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform3D":
        return Transform3D(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(x: float, y: float, z: float) -> "Transform3D":
        return Transform3D(np.eye(3), np.array([x, y, z], dtype=float))

    @staticmethod
    def rot_z(angle: float, translation=(0.0, 0.0, 0.0)) -> "Transform3D":
        c, s = math.cos(angle), math.sin(angle)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return Transform3D(r, np.asarray(translation, dtype=float))

    def inverse(self) -> "Transform3D":
        rt = self.rotation.T.copy()
        return Transform3D(rt, -(rt @ self.translation))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def yaw(self) -> float:
        """Heading of the transformed +x axis in the xy plane."""
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])


def compose(a: Transform3D, b: Transform3D) -> Transform3D:
    """Transform applying b first, then a."""
    r = a.rotation @ b.rotation
    # re-orthonormalize via SVD only when drift would trip validation
    if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
    return Transform3D(r, a.rotation @ b.translation + a.translation)


def transform_points(t: Transform3D, points: np.ndarray) -> np.ndarray:
    """Apply a rigid transform to an (m, 3) point cloud; empty in, empty out."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return pts.copy()
    return pts @ t.rotation.T + t.translation


def lift_pose(pose: Pose2D, z_offset: float = 0.0) -> Transform3D:
    """Embed a planar pose into 3D: yaw rotation about z plus (x, y, z_offset)."""
    return Transform3D.rot_z(pose.theta, (pose.x, pose.y, z_offset))


@dataclass(frozen=True)
class GridMeta:
    """Raster geometry: cell size, map-frame pose of cell (0, 0), and dimensions.

    Cell (ix, iy) covers [origin + ix*res, origin + (ix+1)*res) along the
    origin frame's x axis, likewise for y; arrays are indexed [iy, ix].
    """

    resolution: float
    origin: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    width: int = 1
    height: int = 1

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1 cells")

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width), the numpy array shape."""
        return (self.height, self.width)

    def world_extent(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) for an axis-aligned (theta=0) origin."""
        ox, oy = self.origin.x, self.origin.y
        return (ox, ox + self.width * self.resolution, oy, oy + self.height * self.resolution)


def world_to_grid(point, meta: GridMeta) -> tuple[int, int]:
    """Map-frame point -> (ix, iy) cell index; raises OutOfBoundsError outside."""
    px, py = float(point[0]), float(point[1])
    dx, dy = px - meta.origin.x, py - meta.origin.y
    th = meta.origin.theta
    if th != 0.0:
        c, s = math.cos(th), math.sin(th)
        dx, dy = c * dx + s * dy, -s * dx + c * dy
    ix = math.floor(dx / meta.resolution)
    iy = math.floor(dy / meta.resolution)
    if not (0 <= ix < meta.width and 0 <= iy < meta.height):
        raise OutOfBoundsError(f"point ({px}, {py}) maps to cell ({ix}, {iy}) outside {meta.width}x{meta.height} grid")
    return ix, iy


def grid_to_world(cell, meta: GridMeta) -> tuple[float, float]:
    """Cell index (ix, iy) -> map-frame coordinates of the cell center."""
    ix, iy = int(cell[0]), int(cell[1])
    lx = (ix + 0.5) * meta.resolution
    ly = (iy + 0.5) * meta.resolution
    th = meta.origin.theta
    if th != 0.0:
        c, s = math.cos(th), math.sin(th)
        lx, ly = c * lx - s * ly, s * lx + c * ly
    return meta.origin.x + lx, meta.origin.y + ly
