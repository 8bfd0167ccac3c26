"""Scenario files: one JSON document driving every pipeline phase.

A scenario holds the world (inline or referenced by path), per-phase
change events, all sensor/mapping/planning parameter blocks, the phase
list and the master seed. Unknown keys anywhere are configuration errors.
Per-consumer rng streams are derived from the master seed and a stable
label, so adding a consumer never perturbs the others.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .exploration import ExplorationConfig
from .geometry import Pose2D, Transform3D
from .mapping import MappingParams
from .navigation import MotionParams
from .semantic_map import DEFAULT_ASSOCIATION_RADII, AssociationThresholds
from .sensors import CameraParams, CategoryDetectorParams, DetectorParams, LidarParams
from .world import GtObject, Polyline, Rect, ScenarioEvent, WorldModel

DEFAULT_CATEGORIES = ("table", "chair", "door")


@dataclass(frozen=True)
class SemanticConfig:
    thresholds: AssociationThresholds
    miss_limit: int = 3
    los_margin: float = 0.6

    def __post_init__(self):
        if self.miss_limit < 1:
            raise ConfigError("semantic.miss_limit must be >= 1")
        if self.los_margin < 0:
            raise ConfigError("semantic.los_margin must be >= 0")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    world: WorldModel
    categories: tuple[str, ...]
    lidar: LidarParams
    camera: CameraParams
    detector: DetectorParams
    mapping: MappingParams
    exploration: ExplorationConfig
    motion: MotionParams
    traversal_min_sep: float
    semantic: SemanticConfig
    eval_match_radius: dict[str, float]
    phases: tuple[str, ...]
    pose_noise_sigma: float = 0.0
    source_path: Path | None = None

    def rng(self, label: str) -> np.random.Generator:
        """Independent deterministic stream for one named consumer."""
        return np.random.default_rng(
            np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF,
                                    zlib.crc32(label.encode("utf-8"))]))

    def update_phases(self) -> list[str]:
        return [p.split(":", 1)[1] for p in self.phases if p.startswith("update:")]


def _require_keys(block: dict, allowed: set[str], context: str):
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _get(block: dict, key: str, context: str):
    if key not in block:
        raise ConfigError(f"{context}: missing required key {key!r}")
    return block[key]


def _parse_object(raw: dict, categories: tuple[str, ...], context: str) -> GtObject:
    _require_keys(raw, {"id", "category", "center", "radius", "height", "blocks"}, context)
    category = str(_get(raw, "category", context))
    if category not in categories:
        raise ConfigError(f"{context}: category {category!r} not in configured set {categories}")
    center = _get(raw, "center", context)
    if len(center) != 2:
        raise ConfigError(f"{context}: center must be [x, y]")
    # doors sit on walls and never block space
    default_blocks = category != "door"
    try:
        return GtObject(id=str(_get(raw, "id", context)), category=category,
                        center=(float(center[0]), float(center[1])),
                        radius=float(_get(raw, "radius", context)),
                        height=float(raw.get("height", 1.0)),
                        occupies_grid=bool(raw.get("blocks", default_blocks)))
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _parse_event(raw: dict, categories: tuple[str, ...], context: str) -> ScenarioEvent:
    _require_keys(raw, {"action", "id", "object", "center"}, context)
    action = str(_get(raw, "action", context))
    try:
        if action == "add":
            return ScenarioEvent(action="add",
                                 obj=_parse_object(_get(raw, "object", context),
                                                   categories, f"{context}.object"))
        if action == "remove":
            return ScenarioEvent(action="remove", object_id=str(_get(raw, "id", context)))
        if action == "move":
            center = _get(raw, "center", context)
            return ScenarioEvent(action="move", object_id=str(_get(raw, "id", context)),
                                 new_center=(float(center[0]), float(center[1])))
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    raise ConfigError(f"{context}: unknown action {action!r} (add/remove/move)")


def _parse_world(raw: dict, resolution: float, categories: tuple[str, ...],
                 events: dict[str, tuple[ScenarioEvent, ...]]) -> WorldModel:
    _require_keys(raw, {"bounds", "robot_start", "walls", "objects"}, "world")
    bounds = _get(raw, "bounds", "world")
    start = _get(raw, "robot_start", "world")
    if len(bounds) != 2 or len(start) != 3:
        raise ConfigError("world: bounds must be [w, h] and robot_start [x, y, theta]")
    walls = raw.get("walls", {})
    _require_keys(walls, {"rects", "polylines"}, "world.walls")
    rects = []
    for i, r in enumerate(walls.get("rects", [])):
        if len(r) != 4:
            raise ConfigError(f"world.walls.rects[{i}]: expected [x0, y0, x1, y1]")
        rects.append(Rect(*(float(v) for v in r)))
    polylines = []
    for i, pl in enumerate(walls.get("polylines", [])):
        _require_keys(pl, {"points", "thickness"}, f"world.walls.polylines[{i}]")
        pts = tuple((float(p[0]), float(p[1])) for p in _get(pl, "points", "polyline"))
        polylines.append(Polyline(points=pts, thickness=float(pl.get("thickness", 0.2))))
    objects = tuple(_parse_object(o, categories, f"world.objects[{i}]")
                    for i, o in enumerate(raw.get("objects", [])))
    try:
        return WorldModel(bounds=(float(bounds[0]), float(bounds[1])),
                          robot_start=Pose2D(*(float(v) for v in start)),
                          rects=tuple(rects), polylines=tuple(polylines),
                          objects=objects, events=events, resolution=resolution)
    except Exception as exc:
        raise ConfigError(f"world: {exc}") from exc


def _dataclass_from(block: dict, cls, context: str, **extra):
    allowed = set(cls.__dataclass_fields__) - set(extra)
    _require_keys(block, allowed, context)
    try:
        return cls(**block, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _parse_camera(block: dict) -> CameraParams:
    _require_keys(block, {"hfov", "max_range", "mount"}, "camera")
    mount_block = block.get("mount", {})
    _require_keys(mount_block, {"xyz", "yaw"}, "camera.mount")
    xyz = mount_block.get("xyz", [0.0, 0.0, 0.5])
    if len(xyz) != 3:
        raise ConfigError("camera.mount.xyz must be [x, y, z]")
    mount = Transform3D.rot_z(float(mount_block.get("yaw", 0.0)),
                              tuple(float(v) for v in xyz))
    try:
        return CameraParams(hfov=float(block.get("hfov", 1.6)),
                            max_range=float(block.get("max_range", 6.0)),
                            mount=mount)
    except ValueError as exc:
        raise ConfigError(f"camera: {exc}") from exc


def _parse_detector(block: dict, categories: tuple[str, ...]) -> DetectorParams:
    _require_keys(block, set(categories), "detector")
    out: DetectorParams = {}
    for cat in categories:
        sub = block.get(cat, {})
        params = _dataclass_from(
            {k: (tuple(v) if isinstance(v, list) else v) for k, v in sub.items()},
            CategoryDetectorParams, f"detector.{cat}")
        out[cat] = params
    return out


_TOP_KEYS = {"name", "seed", "resolution", "categories", "world", "events", "lidar",
             "camera", "detector", "mapping", "exploration", "motion", "traversal",
             "semantic", "evaluation", "phases", "pose_noise_sigma"}


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    """Parse and validate a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    _require_keys(raw, _TOP_KEYS, str(path))

    name = str(raw.get("name", path.stem))
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    resolution = float(raw.get("resolution", 0.1))
    if resolution <= 0:
        raise ConfigError("resolution must be positive")
    categories = tuple(str(c) for c in raw.get("categories", DEFAULT_CATEGORIES))

    events: dict[str, tuple[ScenarioEvent, ...]] = {}
    for phase, items in raw.get("events", {}).items():
        events[str(phase)] = tuple(
            _parse_event(e, categories, f"events.{phase}[{i}]") for i, e in enumerate(items))

    world_raw = _get(raw, "world", str(path))
    if isinstance(world_raw, str):
        world_path = (path.parent / world_raw).resolve()
        if not world_path.exists():
            raise ConfigError(f"world file {world_path} does not exist")
        try:
            world_raw = json.loads(world_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{world_path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(world_raw, dict):
        raise ConfigError("world must be an object or a path string")
    world = _parse_world(world_raw, resolution, categories, events)

    lidar = _dataclass_from(raw.get("lidar", {}), LidarParams, "lidar")
    camera = _parse_camera(raw.get("camera", {}))
    detector = _parse_detector(raw.get("detector", {}), categories)
    mapping = _dataclass_from(raw.get("mapping", {}), MappingParams, "mapping")
    exploration = _dataclass_from(
        {k: (math.inf if v == "inf" else v) for k, v in raw.get("exploration", {}).items()},
        ExplorationConfig, "exploration")
    motion = _dataclass_from(raw.get("motion", {}), MotionParams, "motion")

    traversal = raw.get("traversal", {})
    _require_keys(traversal, {"min_sep"}, "traversal")
    min_sep = float(traversal.get("min_sep", 2.0))
    if min_sep <= 0:
        raise ConfigError("traversal.min_sep must be positive")

    semantic_raw = raw.get("semantic", {})
    _require_keys(semantic_raw, {"thresholds", "miss_limit", "los_margin"}, "semantic")
    radii = dict(semantic_raw.get("thresholds", {}))
    for cat in categories:
        if cat not in radii:
            if cat not in DEFAULT_ASSOCIATION_RADII:
                raise ConfigError(f"semantic.thresholds: no radius for category {cat!r}")
            radii[cat] = DEFAULT_ASSOCIATION_RADII[cat]
    try:
        thresholds = AssociationThresholds({str(k): float(v) for k, v in radii.items()})
    except ValueError as exc:
        raise ConfigError(f"semantic.thresholds: {exc}") from exc
    semantic = SemanticConfig(thresholds=thresholds,
                              miss_limit=int(semantic_raw.get("miss_limit", 3)),
                              los_margin=float(semantic_raw.get("los_margin", 0.6)))

    eval_raw = raw.get("evaluation", {})
    _require_keys(eval_raw, {"match_radius"}, "evaluation")
    mr = eval_raw.get("match_radius")
    if mr is None:
        match_radius = dict(thresholds.radii)
    elif isinstance(mr, (int, float)):
        match_radius = {c: float(mr) for c in categories}
    else:
        match_radius = {str(k): float(v) for k, v in mr.items()}

    phases = tuple(str(p) for p in raw.get("phases", ["explore", "plan", "construct", "eval"]))
    known_updates = set(events)
    for p in phases:
        base = p.split(":", 1)
        if base[0] not in {"explore", "plan", "construct", "update", "eval"}:
            raise ConfigError(f"phases: unknown phase {p!r}")
        if base[0] == "update":
            if len(base) != 2:
                raise ConfigError(f"phases: update phase needs a name, got {p!r}")
            if base[1] not in known_updates:
                raise ConfigError(
                    f"phases: update phase {base[1]!r} has no events block; defined: {sorted(known_updates)}")

    return Scenario(name=name, seed=seed, world=world, categories=categories,
                    lidar=lidar, camera=camera, detector=detector, mapping=mapping,
                    exploration=exploration, motion=motion, traversal_min_sep=min_sep,
                    semantic=semantic, eval_match_radius=match_radius, phases=phases,
                    pose_noise_sigma=float(raw.get("pose_noise_sigma", 0.0)),
                    source_path=path)
