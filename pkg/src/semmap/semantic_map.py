"""Hybrid semantic map: occupancy geometry plus a topological object layer.

Object nodes carry a category, a map-frame mean position fused from
camera-frame point clouds, and a detection confidence. New detections are
associated to existing same-category nodes by planar distance against a
per-category radius; unmatched detections become new nodes. During update
passes, nodes expected in the camera view that repeatedly go undetected
are deleted, and unmatched detections are added, so the map tracks object
removal, displacement and addition online.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from . import _kernels
from .errors import EmptyCloudError, MapFormatError
from .geometry import Pose2D, Transform3D, compose, grid_to_world, lift_pose, transform_points, wrap_angle
from .mapping import TrinaryGrid, inflate
from .map_io import load_map, save_map
from .navigation import MotionParams, follow_path, nearest_free_cell, plan_path
from .sensors import CameraParams, Detection, DetectorParams, camera_pose, simulate_detections
from .traversal import Tour
from .world import WorldModel

log = logging.getLogger(__name__)

DEFAULT_ASSOCIATION_RADII = {"chair": 0.75, "table": 1.5, "door": 1.0}


@dataclass(frozen=True)
class AssociationThresholds:
    """Per-category association radius in meters."""

    radii: dict[str, float]

    def __post_init__(self):
        for cat, r in self.radii.items():
            if r <= 0:
                raise ValueError(f"association radius for {cat!r} must be positive")

    @staticmethod
    def defaults() -> "AssociationThresholds":
        return AssociationThresholds(dict(DEFAULT_ASSOCIATION_RADII))

    def for_category(self, category: str) -> float:
        try:
            return self.radii[category]
        except KeyError:
            raise KeyError(f"no association radius configured for category {category!r}") from None


@dataclass
class ObjectNode:
    """One uniquely mapped object.

    position is fixed from insertion to removal; confidence keeps the max
    seen; miss_count is transient update-pass bookkeeping.
    """

    id: int
    category: str
    position: tuple[float, float, float]
    confidence: float
    miss_count: int = 0

    def to_json_dict(self) -> dict:
        return {"id": self.id, "category": self.category,
                "position": list(self.position), "confidence": self.confidence}


class TopologicalMap:
    """Ordered set of object nodes with unique integer ids."""

    def __init__(self):
        self.nodes: dict[int, ObjectNode] = {}
        self.next_id = 1

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def add(self, category: str, position: tuple[float, float, float],
            confidence: float) -> ObjectNode:
        node = ObjectNode(id=self.next_id, category=category,
                          position=tuple(float(v) for v in position),
                          confidence=float(confidence))
        self.nodes[node.id] = node
        self.next_id += 1
        return node

    def remove(self, node_id: int) -> ObjectNode:
        return self.nodes.pop(node_id)

    def of_category(self, category: str) -> list[ObjectNode]:
        return [n for n in self.nodes.values() if n.category == category]

    def count_by_category(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for n in self.nodes.values():
            out[n.category] = out.get(n.category, 0) + 1
        return dict(sorted(out.items()))


@dataclass
class SemanticMap:
    """Occupancy layer plus object layer plus the association thresholds."""

    occupancy: TrinaryGrid
    topo: TopologicalMap
    thresholds: AssociationThresholds


@dataclass(frozen=True)
class MapChange:
    """One change-log entry: a node added to or removed from the map."""

    kind: str  # "added" | "removed"
    node: ObjectNode
    time: float
    pose: Pose2D

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "time": self.time,
                "pose": [self.pose.x, self.pose.y, self.pose.theta],
                "node": self.node.to_json_dict()}


def points_to_map_frame(cloud_camera: np.ndarray, t_camera: Transform3D,
                        t_robot: Transform3D) -> np.ndarray:
    """Camera-frame cloud -> map frame via the robot and camera mounts."""
    return transform_points(compose(t_robot, t_camera), cloud_camera)


def mean_position(cloud_map: np.ndarray) -> tuple[float, float, float]:
    """Per-coordinate arithmetic mean of a non-empty map-frame cloud."""
    pts = np.asarray(cloud_map, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyCloudError("cannot take the mean position of an empty cloud")
    m = pts.mean(axis=0)
    return (float(m[0]), float(m[1]), float(m[2]))


def associate(topo: TopologicalMap, category: str, position,
              thresholds: AssociationThresholds) -> int | None:
    """Id of the nearest same-category node closer than the category radius.

    Distances are planar (x, y). Returns None when nothing is close enough;
    the comparison is strict, so a node exactly at the radius is no match.
    """
    radius = thresholds.for_category(category)
    best_id, best_d = None, math.inf
    for node in topo.of_category(category):
        d = math.hypot(position[0] - node.position[0], position[1] - node.position[1])
        if d < best_d:
            best_id, best_d = node.id, d
    if best_id is not None and best_d < radius:
        return best_id
    return None


def insert_detection(topo: TopologicalMap, category: str, position,
                     confidence: float,
                     thresholds: AssociationThresholds) -> tuple[bool, ObjectNode]:
    """Fold one reduced detection into the map.

    Returns (added, node): on a match the existing node keeps its position,
    takes the max confidence and resets its miss count; otherwise a new
    node is appended.
    """
    match = associate(topo, category, position, thresholds)
    if match is not None:
        node = topo.nodes[match]
        node.confidence = max(node.confidence, float(confidence))
        node.miss_count = 0
        return False, node
    node = topo.add(category, (position[0], position[1], position[2]), confidence)
    return True, node


def expected_nodes_in_fov(topo: TopologicalMap, pose: Pose2D, camera: CameraParams,
                          occ: TrinaryGrid, los_margin: float = 0.6) -> list[int]:
    """Ids of nodes the camera should currently see.

    A node is expected when its (x, y) lies in the horizontal frustum
    within range and the line of sight across the occupancy layer's
    occupied cells reaches to within los_margin of it. The margin keeps an
    object's own occupancy footprint (possibly stale after the object
    moved) from occluding its node.
    """
    cam_x, cam_y, cam_yaw = camera_pose(pose, camera)
    occ_mask = (occ.occupied_mask()).astype(np.uint8)
    no_objects = np.full(occ.meta.shape, -1, dtype=np.int32)
    out = []
    for node in topo:
        dx, dy = node.position[0] - cam_x, node.position[1] - cam_y
        dist = math.hypot(dx, dy)
        if dist > camera.max_range:
            continue
        if dist > 1e-9 and abs(wrap_angle(math.atan2(dy, dx) - cam_yaw)) > camera.hfov / 2.0:
            continue
        if dist > 1e-9:
            reach = _kernels._cast_one(
                occ_mask, no_objects, _kernels.NO_EXCLUDE,
                cam_x, cam_y, math.atan2(dy, dx), dist,
                occ.meta.resolution, occ.meta.origin.x, occ.meta.origin.y)
            if reach < dist - los_margin:
                continue
        out.append(node.id)
    return out


def reduce_detection(det: Detection, pose: Pose2D, camera: CameraParams
                     ) -> tuple[str, tuple[float, float, float], float]:
    """Detection -> (category, map-frame mean position, confidence)."""
    cloud_map = points_to_map_frame(det.cloud_camera, camera.mount, lift_pose(pose))
    return det.category, mean_position(cloud_map), det.confidence


def update_step(smap: SemanticMap, pose: Pose2D,
                detections: list[tuple[str, tuple[float, float, float], float]],
                camera: CameraParams, miss_limit: int = 3,
                sim_time: float = 0.0, los_margin: float = 0.6) -> list[MapChange]:
    """One frame of the online update protocol.

    Every detection is inserted (association first); new nodes emit an
    'added' change. Every node expected in view that has no same-category
    detection within its association radius this frame accrues a miss;
    reaching miss_limit consecutive misses deletes the node and emits
    'removed'. Nodes out of view are untouched.
    """
    expected = expected_nodes_in_fov(smap.topo, pose, camera, smap.occupancy,
                                     los_margin=los_margin)
    changes: list[MapChange] = []
    for category, position, confidence in detections:
        added, node = insert_detection(smap.topo, category, position, confidence,
                                       smap.thresholds)
        if added:
            changes.append(MapChange(kind="added", node=ObjectNode(**vars(node)),
                                     time=sim_time, pose=pose))
    for node_id in expected:
        node = smap.topo.nodes.get(node_id)
        if node is None:
            continue
        radius = smap.thresholds.for_category(node.category)
        seen = any(
            cat == node.category
            and math.hypot(pos[0] - node.position[0], pos[1] - node.position[1]) < radius
            for cat, pos, _ in detections)
        if seen:
            node.miss_count = 0
            continue
        node.miss_count += 1
        if node.miss_count >= miss_limit:
            smap.topo.remove(node_id)
            changes.append(MapChange(kind="removed", node=node, time=sim_time, pose=pose))
    return changes


def _drive_tour(world: WorldModel, smap: SemanticMap, tour: Tour,
                camera: CameraParams, detector: DetectorParams,
                motion: MotionParams, rng: np.random.Generator,
                inflation_radius: float, miss_limit: int | None,
                los_margin: float) -> list[MapChange]:
    """Track the tour; per control step detect and fold into the map.

    miss_limit None means construction (insert only, no deletions).
    """
    inflated = inflate(smap.occupancy, inflation_radius)
    pose = tour.waypoints[0]
    sim_time = 0.0
    changes: list[MapChange] = []

    def process_frame():
        dets = simulate_detections(world, pose, camera, detector, rng)
        reduced = [reduce_detection(d, pose, camera) for d in dets]
        if miss_limit is None:
            for category, position, confidence in reduced:
                added, node = insert_detection(smap.topo, category, position,
                                               confidence, smap.thresholds)
                if added:
                    changes.append(MapChange(kind="added", node=ObjectNode(**vars(node)),
                                             time=sim_time, pose=pose))
        else:
            changes.extend(update_step(smap, pose, reduced, camera,
                                       miss_limit=miss_limit, sim_time=sim_time,
                                       los_margin=los_margin))

    process_frame()
    snap_radius = max(2.0 * inflation_radius, 0.5)
    for target in tour.waypoints[1:]:
        # waypoints recorded against a partial map may sit inside the final
        # inflation zone; drive to the nearest plannable cell instead
        goal_cell = nearest_free_cell(inflated, (target.x, target.y), max_radius_m=snap_radius)
        leg = None
        if goal_cell is not None:
            goal = grid_to_world(goal_cell, inflated.meta)
            leg = plan_path(inflated, pose, goal, start_snap_radius=snap_radius)
        if leg is None:
            log.warning("tour leg to (%.2f, %.2f) unreachable; skipping", target.x, target.y)
            continue
        leg_end = leg[-1]  # cell center nearest the waypoint
        while (pose.x, pose.y) != leg_end:
            pose = follow_path(pose, leg, motion)
            sim_time += motion.dt
            process_frame()
    return changes


def construct(world: WorldModel, occ: TrinaryGrid, tour: Tour,
              camera: CameraParams, detector: DetectorParams,
              thresholds: AssociationThresholds, motion: MotionParams,
              rng: np.random.Generator, inflation_radius: float = 0.7
              ) -> tuple[SemanticMap, list[MapChange]]:
    """Build the object layer from scratch by driving the tour once."""
    smap = SemanticMap(occupancy=occ, topo=TopologicalMap(), thresholds=thresholds)
    changes = _drive_tour(world, smap, tour, camera, detector, motion, rng,
                          inflation_radius, miss_limit=None, los_margin=0.0)
    return smap, changes


def update_pass(world: WorldModel, smap: SemanticMap, tour: Tour,
                camera: CameraParams, detector: DetectorParams,
                motion: MotionParams, rng: np.random.Generator,
                inflation_radius: float = 0.7, miss_limit: int = 3,
                los_margin: float = 0.6) -> tuple[SemanticMap, list[MapChange]]:
    """Re-drive the tour against a (possibly changed) world, editing the map."""
    for node in smap.topo:
        node.miss_count = 0
    changes = _drive_tour(world, smap, tour, camera, detector, motion, rng,
                          inflation_radius, miss_limit=miss_limit,
                          los_margin=los_margin)
    return smap, changes


# ---------------------------------------------------------------------------
# persistence

def save_semantic_map(smap: SemanticMap, json_path, pgm_path=None) -> FsPath:
    """Write the node layer as JSON; optionally also the occupancy PGM/YAML."""
    json_path = FsPath(json_path)
    if pgm_path is not None:
        save_map(smap.occupancy, pgm_path)
    doc = {
        "thresholds": {cat: smap.thresholds.radii[cat] for cat in sorted(smap.thresholds.radii)},
        "nodes": [smap.topo.nodes[i].to_json_dict() for i in sorted(smap.topo.nodes)],
    }
    json_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="ascii")
    return json_path


def load_semantic_map(json_path, yaml_path) -> SemanticMap:
    """Load the JSON node layer and the PGM/YAML occupancy pair."""
    json_path = FsPath(json_path)
    occupancy = load_map(yaml_path)
    try:
        doc = json.loads(json_path.read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise MapFormatError(
            f"{json_path}: bad semantic map JSON at line {exc.lineno} col {exc.colno} "
            f"(byte {exc.pos}): {exc.msg}") from exc
    try:
        thresholds = AssociationThresholds(
            {str(k): float(v) for k, v in doc["thresholds"].items()})
        topo = TopologicalMap()
        for nd in doc["nodes"]:
            node = ObjectNode(id=int(nd["id"]), category=str(nd["category"]),
                              position=tuple(float(v) for v in nd["position"]),
                              confidence=float(nd["confidence"]))
            if node.id in topo.nodes:
                raise MapFormatError(f"{json_path}: duplicate node id {node.id}")
            topo.nodes[node.id] = node
        topo.next_id = max(topo.nodes, default=0) + 1
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"{json_path}: bad semantic map structure: {exc}") from exc
    return SemanticMap(occupancy=occupancy, topo=topo, thresholds=thresholds)


def save_change_log(changes: list[MapChange], path) -> None:
    """Line-delimited JSON, one change per line."""
    lines = [json.dumps(c.to_json_dict()) for c in changes]
    FsPath(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def load_change_log(path) -> list[dict]:
    out = []
    for ln, line in enumerate(FsPath(path).read_text(encoding="ascii").splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise MapFormatError(f"{path}:{ln}: bad change-log line: {exc.msg}") from exc
    return out
