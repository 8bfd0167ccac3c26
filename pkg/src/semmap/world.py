"""Ground-truth world: static walls, objects, scripted change events.

The world rasterizes itself once at construction into a wall mask plus an
object-index grid; sensors run exact ray traversal against those rasters.
Worlds are treated as immutable during a phase; applying scenario events
produces a new world with a fresh raster.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import DuplicateIdError, OutOfBoundsError, UnknownIdError
from .geometry import GridMeta, Pose2D, world_to_grid


@dataclass(frozen=True)
class Rect:
    """Axis-aligned solid wall block, corners in meters."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate rect {self}")


@dataclass(frozen=True)
class Polyline:
    """Wall segment chain with a physical thickness."""

    points: tuple[tuple[float, float], ...]
    thickness: float = 0.2

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("polyline needs at least two points")
        if self.thickness <= 0:
            raise ValueError("polyline thickness must be positive")


@dataclass(frozen=True)
class GtObject:
    """Ground-truth object with a circular footprint.

    Doors sit flat on walls and do not block space; tables and chairs do
    (controlled by occupies_grid).
    """

    id: str
    category: str
    center: tuple[float, float]
    radius: float
    height: float = 1.0
    occupies_grid: bool = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"object {self.id}: radius must be positive")
        if self.height <= 0:
            raise ValueError(f"object {self.id}: height must be positive")

    @property
    def centroid(self) -> tuple[float, float, float]:
        """Reference 3D centroid: footprint center at half height."""
        return (self.center[0], self.center[1], self.height / 2.0)


@dataclass(frozen=True)
class ScenarioEvent:
    """One scripted change: action is 'remove', 'add' or 'move'."""

    action: str
    object_id: str | None = None
    obj: GtObject | None = None
    new_center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.action not in ("remove", "add", "move"):
            raise ValueError(f"unknown event action {self.action!r}")
        if self.action == "add" and self.obj is None:
            raise ValueError("add event needs an object")
        if self.action in ("remove", "move") and not self.object_id:
            raise ValueError(f"{self.action} event needs an object id")
        if self.action == "move" and self.new_center is None:
            raise ValueError("move event needs a new center")


@dataclass
class WorldModel:
    """Static geometry + objects + per-phase event script, with raster caches."""

    bounds: tuple[float, float]
    robot_start: Pose2D
    rects: tuple[Rect, ...] = ()
    polylines: tuple[Polyline, ...] = ()
    objects: tuple[GtObject, ...] = ()
    events: dict[str, tuple[ScenarioEvent, ...]] = field(default_factory=dict)
    resolution: float = 0.1

    # raster caches, rebuilt in __post_init__
    meta: GridMeta = field(init=False)
    wall_mask: np.ndarray = field(init=False)      # (H, W) uint8
    object_id_grid: np.ndarray = field(init=False)  # (H, W) int32, -1 = none
    blocked_mask: np.ndarray = field(init=False)    # wall or blocking object

    def __post_init__(self):
        w, h = self.bounds
        if w <= 0 or h <= 0:
            raise ValueError("world bounds must be positive")
        seen: set[str] = set()
        for obj in self.objects:
            if obj.id in seen:
                raise DuplicateIdError(f"duplicate object id {obj.id!r}")
            seen.add(obj.id)
        if not self.contains(self.robot_start.x, self.robot_start.y):
            raise OutOfBoundsError("robot start outside world bounds")
        self._rebuild_raster()

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.bounds[0] and 0.0 <= y <= self.bounds[1]

    def _rebuild_raster(self):
        res = self.resolution
        width = max(1, round(self.bounds[0] / res))
        height = max(1, round(self.bounds[1] / res))
        self.meta = GridMeta(resolution=res, origin=Pose2D(0.0, 0.0, 0.0),
                             width=width, height=height)
        xs = (np.arange(width) + 0.5) * res
        ys = (np.arange(height) + 0.5) * res
        cx, cy = np.meshgrid(xs, ys)  # (H, W) cell centers

        wall = np.zeros((height, width), dtype=np.uint8)
        for r in self.rects:
            wall |= ((cx >= r.x0) & (cx <= r.x1) & (cy >= r.y0) & (cy <= r.y1)).astype(np.uint8)
        for pl in self.polylines:
            half = pl.thickness / 2.0
            pts = pl.points
            for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
                ux, uy = bx - ax, by - ay
                seg_len2 = ux * ux + uy * uy
                if seg_len2 == 0.0:
                    d2 = (cx - ax) ** 2 + (cy - ay) ** 2
                else:
                    t = np.clip(((cx - ax) * ux + (cy - ay) * uy) / seg_len2, 0.0, 1.0)
                    d2 = (cx - (ax + t * ux)) ** 2 + (cy - (ay + t * uy)) ** 2
                wall |= (d2 <= half * half).astype(np.uint8)

        obj_id = np.full((height, width), -1, dtype=np.int32)
        for idx, obj in enumerate(self.objects):
            if not obj.occupies_grid:
                continue
            ox, oy = obj.center
            d2 = (cx - ox) ** 2 + (cy - oy) ** 2
            obj_id[d2 <= obj.radius * obj.radius] = idx

        self.wall_mask = wall
        self.object_id_grid = obj_id
        self.blocked_mask = (wall != 0) | (obj_id >= 0)

    def object_by_id(self, object_id: str) -> GtObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise UnknownIdError(f"no object with id {object_id!r}")

    def objects_of(self, category: str) -> list[GtObject]:
        return [o for o in self.objects if o.category == category]

    def categories(self) -> list[str]:
        return sorted({o.category for o in self.objects})

    def ground_truth_grid(self) -> np.ndarray:
        """Trinary-style int8 raster: 1 blocked, 0 free (no unknown cells)."""
        return self.blocked_mask.astype(np.int8)

    def reachable_free_mask(self, start: Pose2D | None = None) -> np.ndarray:
        """Free cells connected (8-way) to the start cell, on the true raster."""
        start = start or self.robot_start
        free = ~self.blocked_mask
        labels, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=int))
        ix, iy = world_to_grid((start.x, start.y), self.meta)
        lab = labels[iy, ix]
        if lab == 0:
            raise OutOfBoundsError("robot start cell is not free")
        return labels == lab


def apply_scenario_events(world: WorldModel, phase: str) -> WorldModel:
    """New world with the named phase's events applied in file order."""
    if phase not in world.events:
        known = ", ".join(sorted(world.events)) or "(none)"
        raise UnknownIdError(f"phase {phase!r} not defined; defined phases: {known}")
    objects = list(world.objects)
    ids = {o.id for o in objects}
    for ev in world.events[phase]:
        if ev.action == "remove":
            if ev.object_id not in ids:
                raise UnknownIdError(f"remove: no object with id {ev.object_id!r}")
            objects = [o for o in objects if o.id != ev.object_id]
            ids.discard(ev.object_id)
        elif ev.action == "add":
            assert ev.obj is not None
            if ev.obj.id in ids:
                raise DuplicateIdError(f"add: id {ev.obj.id!r} already exists")
            objects.append(ev.obj)
            ids.add(ev.obj.id)
        else:  # move
            if ev.object_id not in ids:
                raise UnknownIdError(f"move: no object with id {ev.object_id!r}")
            objects = [replace(o, center=tuple(ev.new_center)) if o.id == ev.object_id else o
                       for o in objects]
    return WorldModel(bounds=world.bounds, robot_start=world.robot_start,
                      rects=world.rects, polylines=world.polylines,
                      objects=tuple(objects), events=world.events,
                      resolution=world.resolution)
