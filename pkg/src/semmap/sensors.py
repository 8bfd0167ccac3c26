"""Simulated LiDAR and object detector over the ground-truth world.

Both sensors are pure functions of (world, pose, params, rng) and are
bitwise reproducible for a fixed rng state. Detections carry the true
object id for evaluation only; mapping code never reads it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import OutOfBoundsError
from .geometry import Pose2D, Transform3D, compose, lift_pose, transform_points, wrap_angle
from .world import GtObject, WorldModel

# footprint samples for the visibility test: center + 8 boundary points
VISIBILITY_SAMPLES = 9


@dataclass(frozen=True)
class LidarParams:
    n_beams: int = 360
    fov: float = 2.0 * math.pi
    max_range: float = 10.0
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if not (0.0 < self.fov <= 2.0 * math.pi + 1e-12):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.range_noise_sigma < 0:
            raise ValueError("range_noise_sigma must be >= 0")


@dataclass(frozen=True)
class CameraParams:
    """Horizontal field of view, range limit, and mount transform in the robot frame."""

    hfov: float = 1.6
    max_range: float = 6.0
    mount: Transform3D = field(default_factory=Transform3D.identity)

    def __post_init__(self):
        if not (0.0 < self.hfov < math.pi):
            raise ValueError("hfov must be in (0, pi)")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class CategoryDetectorParams:
    """Detector behaviour for one object category."""

    detect_prob: float = 0.9
    fp_rate_per_frame: float = 0.0
    position_noise_sigma: float = 0.0
    confidence_range_tp: tuple[float, float] = (0.6, 0.95)
    confidence_range_fp: tuple[float, float] = (0.3, 0.6)
    min_visible_fraction: float = 0.3
    points_per_segment: int = 40

    def __post_init__(self):
        if not (0.0 <= self.detect_prob <= 1.0):
            raise ValueError("detect_prob must be in [0, 1]")
        if self.fp_rate_per_frame < 0:
            raise ValueError("fp_rate_per_frame must be >= 0")
        if self.position_noise_sigma < 0:
            raise ValueError("position_noise_sigma must be >= 0")
        for lo, hi in (self.confidence_range_tp, self.confidence_range_fp):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError("confidence ranges must be ordered within [0, 1]")
        if not (0.0 <= self.min_visible_fraction <= 1.0):
            raise ValueError("min_visible_fraction must be in [0, 1]")
        if self.points_per_segment < 1:
            raise ValueError("points_per_segment must be >= 1")


DetectorParams = dict[str, CategoryDetectorParams]


@dataclass(frozen=True)
class LidarScan:
    """Beam angles in the map frame with measured ranges."""

    angles: np.ndarray
    ranges: np.ndarray
    max_range: float

    def __iter__(self):
        return iter(zip(self.angles, self.ranges))

    def __len__(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class Detection:
    """One simulated detector output: a labeled camera-frame point cloud.

    truth_id is None for false positives and exists for evaluation only.
    """

    category: str
    confidence: float
    cloud_camera: np.ndarray
    truth_id: str | None = None

    def __post_init__(self):
        if self.cloud_camera.shape[0] == 0:
            raise ValueError("detections must carry a non-empty cloud")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0, 1]")


def _check_origin(world: WorldModel, x: float, y: float):
    if not world.contains(x, y):
        raise OutOfBoundsError(f"ray origin ({x}, {y}) outside world bounds {world.bounds}")


def raycast(world: WorldModel, origin, direction: float, max_range: float,
            exclude_object: int = _kernels.NO_EXCLUDE) -> float:
    """Distance to the first blocking cell along a single ray.

    Returns max_range when nothing blocks, 0.0 when the origin cell is
    blocked. exclude_object makes one object's cells transparent (by index
    into world.objects), used for self-occlusion-free visibility checks.
    """
    ox, oy = float(origin[0]), float(origin[1])
    _check_origin(world, ox, oy)
    return float(_kernels._cast_one(
        world.wall_mask, world.object_id_grid, exclude_object,
        ox, oy, float(direction), float(max_range),
        world.meta.resolution, world.meta.origin.x, world.meta.origin.y))


def beam_angles(pose_theta: float, params: LidarParams) -> np.ndarray:
    """Beam directions: midpoints of n equal fov slices centered on the heading."""
    n = params.n_beams
    offsets = (np.arange(n) + 0.5) / n * params.fov - params.fov / 2.0
    return pose_theta + offsets


def simulate_lidar(world: WorldModel, pose: Pose2D, params: LidarParams,
                   rng: np.random.Generator) -> LidarScan:
    """Cast all beams from the pose and add clamped Gaussian range noise."""
    _check_origin(world, pose.x, pose.y)
    angles = beam_angles(pose.theta, params)
    ranges = _kernels.cast_rays(
        world.wall_mask, world.object_id_grid, _kernels.NO_EXCLUDE,
        pose.x, pose.y, angles, params.max_range,
        world.meta.resolution, world.meta.origin.x, world.meta.origin.y)
    if params.range_noise_sigma > 0:
        ranges = ranges + rng.normal(0.0, params.range_noise_sigma, size=ranges.shape)
        ranges = np.clip(ranges, 0.0, params.max_range)
    return LidarScan(angles=angles, ranges=ranges, max_range=params.max_range)


def camera_pose(pose: Pose2D, camera: CameraParams) -> tuple[float, float, float]:
    """Camera position (x, y) and yaw in the map frame."""
    t = compose(lift_pose(pose), camera.mount)
    return float(t.translation[0]), float(t.translation[1]), t.yaw()


def _footprint_samples(obj: GtObject) -> np.ndarray:
    k = VISIBILITY_SAMPLES - 1
    ang = np.arange(k) * (2.0 * math.pi / k)
    pts = np.empty((VISIBILITY_SAMPLES, 2))
    pts[0] = obj.center
    pts[1:, 0] = obj.center[0] + obj.radius * np.cos(ang)
    pts[1:, 1] = obj.center[1] + obj.radius * np.sin(ang)
    return pts


def _sample_visible(world: WorldModel, cam_x: float, cam_y: float, cam_yaw: float,
                    camera: CameraParams, px: float, py: float, exclude: int) -> bool:
    dx, dy = px - cam_x, py - cam_y
    dist = math.hypot(dx, dy)
    if dist > camera.max_range:
        return False
    if dist > 1e-9 and abs(wrap_angle(math.atan2(dy, dx) - cam_yaw)) > camera.hfov / 2.0:
        return False
    if dist <= 1e-9:
        return True
    reach = _kernels._cast_one(
        world.wall_mask, world.object_id_grid, exclude,
        cam_x, cam_y, math.atan2(dy, dx), dist,
        world.meta.resolution, world.meta.origin.x, world.meta.origin.y)
    # the sample cell itself may be blocked (it sits on the footprint); the
    # ray only needs to get within a cell of it
    return reach >= dist - world.meta.resolution * 1.5


def visible_fraction(world: WorldModel, pose: Pose2D, camera: CameraParams,
                     obj: GtObject) -> float:
    """Fraction of footprint samples inside the frustum with clear line of sight.

    The object's own cells are transparent for the line-of-sight rays.
    """
    cam_x, cam_y, cam_yaw = camera_pose(pose, camera)
    try:
        exclude = next(i for i, o in enumerate(world.objects) if o.id == obj.id)
    except StopIteration:
        exclude = _kernels.NO_EXCLUDE
    samples = _footprint_samples(obj)
    seen = sum(
        _sample_visible(world, cam_x, cam_y, cam_yaw, camera, px, py, exclude)
        for px, py in samples)
    return seen / float(VISIBILITY_SAMPLES)


def _cloud_for_object(obj: GtObject, sigma: float, m: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Map-frame surface samples: uniform on the footprint rim, uniform in height."""
    ang = rng.uniform(0.0, 2.0 * math.pi, size=m)
    pts = np.empty((m, 3))
    pts[:, 0] = obj.center[0] + obj.radius * np.cos(ang)
    pts[:, 1] = obj.center[1] + obj.radius * np.sin(ang)
    pts[:, 2] = rng.uniform(0.0, obj.height, size=m)
    if sigma > 0:
        pts += rng.normal(0.0, sigma, size=pts.shape)
    return pts


def _fp_position(world: WorldModel, cam_x: float, cam_y: float, cam_yaw: float,
                 camera: CameraParams, rng: np.random.Generator) -> tuple[float, float] | None:
    """Uniform-random free, in-view spot for a phantom detection; None if unlucky."""
    for _ in range(50):
        ang = cam_yaw + rng.uniform(-camera.hfov / 2.0, camera.hfov / 2.0)
        dist = rng.uniform(0.3, camera.max_range)
        px, py = cam_x + dist * math.cos(ang), cam_y + dist * math.sin(ang)
        if not world.contains(px, py):
            continue
        ix = int((px - world.meta.origin.x) / world.meta.resolution)
        iy = int((py - world.meta.origin.y) / world.meta.resolution)
        if world.blocked_mask[iy, ix]:
            continue
        reach = _kernels._cast_one(
            world.wall_mask, world.object_id_grid, _kernels.NO_EXCLUDE,
            cam_x, cam_y, ang, dist,
            world.meta.resolution, world.meta.origin.x, world.meta.origin.y)
        if reach >= dist - world.meta.resolution:
            return px, py
    return None


def simulate_detections(world: WorldModel, pose: Pose2D, camera: CameraParams,
                        detector: DetectorParams,
                        rng: np.random.Generator) -> list[Detection]:
    """Detector frame: per-object Bernoulli hits plus Poisson false positives.

    Clouds are expressed in the camera frame so the consumer has to run the
    map-frame fusion itself.
    """
    _check_origin(world, pose.x, pose.y)
    cam_x, cam_y, cam_yaw = camera_pose(pose, camera)
    to_camera = compose(lift_pose(pose), camera.mount).inverse()
    out: list[Detection] = []
    for obj in world.objects:
        params = detector.get(obj.category)
        if params is None:
            continue
        if visible_fraction(world, pose, camera, obj) < params.min_visible_fraction:
            continue
        if params.detect_prob < 1.0 and rng.random() >= params.detect_prob:
            continue
        cloud_map = _cloud_for_object(obj, params.position_noise_sigma,
                                      params.points_per_segment, rng)
        conf = float(rng.uniform(*params.confidence_range_tp))
        out.append(Detection(category=obj.category, confidence=conf,
                             cloud_camera=transform_points(to_camera, cloud_map),
                             truth_id=obj.id))
    for category in sorted(detector):
        params = detector[category]
        if params.fp_rate_per_frame <= 0:
            continue
        for _ in range(rng.poisson(params.fp_rate_per_frame)):
            spot = _fp_position(world, cam_x, cam_y, cam_yaw, camera, rng)
            if spot is None:
                continue
            sigma = max(params.position_noise_sigma, 0.05)
            pts = np.empty((params.points_per_segment, 3))
            pts[:, 0] = rng.normal(spot[0], sigma, size=params.points_per_segment)
            pts[:, 1] = rng.normal(spot[1], sigma, size=params.points_per_segment)
            pts[:, 2] = rng.uniform(0.0, 1.0, size=params.points_per_segment)
            conf = float(rng.uniform(*params.confidence_range_fp))
            out.append(Detection(category=category, confidence=conf,
                                 cloud_camera=transform_points(to_camera, pts),
                                 truth_id=None))
    return out
