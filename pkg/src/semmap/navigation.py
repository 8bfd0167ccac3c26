"""Grid path planning and a kinematic point-robot path follower.

Planning runs single-source shortest paths (scipy's C Dijkstra) over the
8-connected free-cell graph of an inflated grid, with unit straight and
sqrt(2) diagonal edge costs in cell units. Diagonal steps require both
adjacent orthogonal cells to be free, so paths never cut wall corners.
Unknown cells are untraversable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .geometry import Pose2D, grid_to_world, world_to_grid
from .mapping import FREE, TrinaryGrid

# a path is an ordered list of map-frame cell centers, start to goal
Path = list[tuple[float, float]]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MotionParams:
    max_speed: float = 0.6
    dt: float = 0.25
    replan_period: int = 8

    def __post_init__(self):
        if self.max_speed <= 0:
            raise ValueError("max_speed must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.replan_period < 1:
            raise ValueError("replan_period must be >= 1")


class DistanceField:
    """Shortest-path costs from one start cell to every reachable free cell."""

    def __init__(self, grid: TrinaryGrid, start_cell: tuple[int, int]):
        self.grid = grid
        self.meta = grid.meta
        h, w = grid.meta.shape
        free = grid.cells == FREE
        sx, sy = start_cell
        if not (0 <= sx < w and 0 <= sy < h) or not free[sy, sx]:
            raise ValueError(f"start cell {start_cell} is not free")
        self.start_cell = (sx, sy)

        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        data: list[np.ndarray] = []
        idx = np.arange(h * w).reshape(h, w)
        straight = ((0, 1), (1, 0))
        for dy, dx in straight:
            src = free[: h - dy, : w - dx] & free[dy:, dx:]
            rows.append(idx[: h - dy, : w - dx][src])
            cols.append(idx[dy:, dx:][src])
            data.append(np.full(src.sum(), 1.0))
        for dy, dx in ((1, 1), (1, -1)):
            # both orthogonal neighbours must be free (no corner cutting)
            if dx > 0:
                src = (free[: h - 1, : w - 1] & free[1:, 1:]
                       & free[: h - 1, 1:] & free[1:, : w - 1])
                rows.append(idx[: h - 1, : w - 1][src])
                cols.append(idx[1:, 1:][src])
            else:
                src = (free[: h - 1, 1:] & free[1:, : w - 1]
                       & free[: h - 1, : w - 1] & free[1:, 1:])
                rows.append(idx[: h - 1, 1:][src])
                cols.append(idx[1:, : w - 1][src])
            data.append(np.full(src.sum(), _SQRT2))
        row = np.concatenate(rows)
        col = np.concatenate(cols)
        wgt = np.concatenate(data)
        graph = coo_matrix((wgt, (row, col)), shape=(h * w, h * w)).tocsr()
        dist, pred = _csgraph_dijkstra(graph, directed=False,
                                       indices=sy * w + sx,
                                       return_predecessors=True)
        self._dist = dist
        self._pred = pred
        self._w = w

    def cost_to(self, cell: tuple[int, int]) -> float:
        """Path cost in cell units; inf when unreachable."""
        ix, iy = cell
        return float(self._dist[iy * self._w + ix])

    def path_to(self, cell: tuple[int, int]) -> Path | None:
        """Cell-center polyline from the start to the cell; None if unreachable."""
        ix, iy = cell
        node = iy * self._w + ix
        if not math.isfinite(self._dist[node]):
            return None
        chain = [node]
        while self._pred[node] >= 0:
            node = self._pred[node]
            chain.append(node)
        chain.reverse()
        return [grid_to_world((n % self._w, n // self._w), self.meta) for n in chain]


def path_cost_cells(path: Path, resolution: float) -> float:
    """Length of a cell-center polyline, in cell units."""
    total = 0.0
    for (ax, ay), (bx, by) in zip(path[:-1], path[1:]):
        total += math.hypot(bx - ax, by - ay)
    return total / resolution


def nearest_free_cell(grid: TrinaryGrid, point, max_radius_m: float = 1.0) -> tuple[int, int] | None:
    """Free cell closest to a map-frame point, searched out to max_radius_m."""
    res = grid.meta.resolution
    h, w = grid.meta.shape
    cx = (point[0] - grid.meta.origin.x) / res - 0.5
    cy = (point[1] - grid.meta.origin.y) / res - 0.5
    r_cells = int(math.ceil(max_radius_m / res))
    ix0 = int(round(cx))
    iy0 = int(round(cy))
    best = None
    best_d2 = (max_radius_m / res) ** 2 + 1e-9
    for iy in range(max(0, iy0 - r_cells), min(h, iy0 + r_cells + 1)):
        for ix in range(max(0, ix0 - r_cells), min(w, ix0 + r_cells + 1)):
            if grid.cells[iy, ix] != FREE:
                continue
            d2 = (ix - cx) ** 2 + (iy - cy) ** 2
            if d2 < best_d2 or (d2 == best_d2 and best is not None and (iy, ix) < (best[1], best[0])):
                best = (ix, iy)
                best_d2 = d2
    return best


def plan_path(inflated: TrinaryGrid, start: Pose2D, goal,
              start_snap_radius: float = 0.5) -> Path | None:
    """Cost-optimal 8-connected path between map-frame points; None when no path.

    The goal must land on a free cell. A start pose inside an inflation
    pocket (the map can grow obstacles under a robot that committed to a
    goal earlier) is snapped to the nearest free cell within
    start_snap_radius, the planning equivalent of a recovery behaviour.
    """
    try:
        goal_cell = world_to_grid(goal, inflated.meta)
    except Exception:
        return None
    if inflated.cells[goal_cell[1], goal_cell[0]] != FREE:
        return None
    start_cell = world_to_grid((start.x, start.y), inflated.meta)
    if inflated.cells[start_cell[1], start_cell[0]] != FREE:
        snapped = nearest_free_cell(inflated, (start.x, start.y),
                                    max_radius_m=start_snap_radius)
        if snapped is None:
            raise ValueError(f"start pose ({start.x}, {start.y}) is not in free space")
        start_cell = snapped
    field = DistanceField(inflated, start_cell)
    return field.path_to(goal_cell)


def follow_path(pose: Pose2D, path: Path, params: MotionParams) -> Pose2D:
    """Advance along the path polyline by at most max_speed*dt.

    The pose is projected onto the polyline, the lookahead target is the
    polyline point one step budget further, and the pose moves straight
    toward it (never more than the budget). Within one budget of the goal
    the pose snaps onto it. Heading follows the direction of travel.
    """
    if not path:
        return pose
    budget = params.max_speed * params.dt
    if budget <= 0.0:
        return pose
    goal = path[-1]
    if math.hypot(goal[0] - pose.x, goal[1] - pose.y) <= budget:
        theta = pose.theta
        d = math.hypot(goal[0] - pose.x, goal[1] - pose.y)
        if d > 1e-12:
            theta = math.atan2(goal[1] - pose.y, goal[0] - pose.x)
        return Pose2D(goal[0], goal[1], theta)

    # arc-length of the closest polyline point to the pose
    best_s, best_d2, acc = 0.0, math.inf, 0.0
    for (ax, ay), (bx, by) in zip(path[:-1], path[1:]):
        ux, uy = bx - ax, by - ay
        seg = math.hypot(ux, uy)
        if seg < 1e-12:
            continue
        t = max(0.0, min(1.0, ((pose.x - ax) * ux + (pose.y - ay) * uy) / (seg * seg)))
        px, py = ax + t * ux, ay + t * uy
        d2 = (pose.x - px) ** 2 + (pose.y - py) ** 2
        if d2 < best_d2 - 1e-15:
            best_d2 = d2
            best_s = acc + t * seg
        acc += seg
    target = _point_at(path, best_s + budget)
    dx, dy = target[0] - pose.x, target[1] - pose.y
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return pose
    scale = min(1.0, budget / d)
    nx, ny = pose.x + dx * scale, pose.y + dy * scale
    return Pose2D(nx, ny, math.atan2(dy, dx))


def _point_at(path: Path, s: float) -> tuple[float, float]:
    acc = 0.0
    for (ax, ay), (bx, by) in zip(path[:-1], path[1:]):
        seg = math.hypot(bx - ax, by - ay)
        if acc + seg >= s and seg > 1e-12:
            t = (s - acc) / seg
            return (ax + t * (bx - ax), ay + t * (by - ay))
        acc += seg
    return path[-1]
