"""Frontier exploration with a dynamic local/global search window.

The explorer senses, folds the scan into the occupancy grid, periodically
re-detects frontier clusters and drives to the cheapest reachable one.
The candidate window starts at a local radius around the robot and widens
to the global radius when too few local frontiers remain. Exploration
stops when the cluster count drops to the termination threshold or the
simulated time budget runs out.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np
from scipy import ndimage

from .errors import StuckError
from .geometry import GridMeta, Pose2D, grid_to_world, world_to_grid
from .mapping import (FREE, UNKNOWN, MappingParams, OccupancyGrid, TrinaryGrid,
                      inflate, integrate_scan, to_trinary)
from .navigation import DistanceField, MotionParams, Path, follow_path, nearest_free_cell
from .sensors import LidarParams, simulate_lidar
from .world import WorldModel

log = logging.getLogger(__name__)

# (sim time, pose) samples in exploration order
Trajectory = list[tuple[float, Pose2D]]


@dataclass(frozen=True)
class FrontierCluster:
    """8-connected component of free cells that border unknown space."""

    cells: np.ndarray          # (k, 2) int array of (ix, iy)
    centroid: tuple[float, float]  # map frame, meters
    size: int


@dataclass(frozen=True)
class ExplorationConfig:
    local_radius: float = 5.0
    local_count_threshold: int = 1
    global_radius: float = math.inf
    termination_frontier_threshold: int = 0
    time_budget: float = 600.0
    min_cluster_size: int = 3
    record_period: float = 4.0
    inflation_radius: float = 0.7

    def __post_init__(self):
        if self.local_radius > self.global_radius:
            raise ValueError("local_radius must not exceed global_radius")
        if self.local_count_threshold < 0 or self.termination_frontier_threshold < 0:
            raise ValueError("thresholds must be >= 0")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if self.record_period <= 0:
            raise ValueError("record_period must be positive")
        if self.inflation_radius < 0:
            raise ValueError("inflation_radius must be >= 0")


def detect_frontiers(grid: TrinaryGrid, min_cluster_size: int = 3) -> list[FrontierCluster]:
    """Cluster free cells that touch unknown space (8-connectivity).

    Clusters below min_cluster_size are dropped; output is sorted by size
    (largest first), then centroid grid row and column.
    """
    free = grid.cells == FREE
    unknown = grid.cells == UNKNOWN
    eight = np.ones((3, 3), dtype=bool)
    frontier = free & ndimage.binary_dilation(unknown, structure=eight)
    labels, n = ndimage.label(frontier, structure=eight)
    if n == 0:
        return []
    sizes = np.bincount(labels.ravel())
    out = []
    for lab in range(1, n + 1):
        if sizes[lab] < min_cluster_size:
            continue
        ys, xs = np.nonzero(labels == lab)
        row = float(ys.mean())
        col = float(xs.mean())
        centroid = (grid.meta.origin.x + (col + 0.5) * grid.meta.resolution,
                    grid.meta.origin.y + (row + 0.5) * grid.meta.resolution)
        cells = np.column_stack([xs, ys]).astype(np.int64)
        out.append((int(sizes[lab]), row, col, cells, centroid))
    out.sort(key=lambda item: (-item[0], item[1], item[2]))
    return [FrontierCluster(cells=cells, centroid=centroid, size=size)
            for size, _, _, cells, centroid in out]


def _candidate_goal(cluster: FrontierCluster, inflated: TrinaryGrid) -> tuple[int, int] | None:
    return nearest_free_cell(inflated, cluster.centroid, max_radius_m=1.5)


def select_frontier(clusters: list[FrontierCluster], pose: Pose2D,
                    inflated: TrinaryGrid, cfg: ExplorationConfig,
                    field: DistanceField | None = None
                    ) -> tuple[tuple[float, float], Path, FrontierCluster] | None:
    """Pick the cheapest reachable frontier goal inside the search window.

    Returns (goal point, path, cluster) or None when no candidate has a
    plan. The window holds clusters whose centroid is within local_radius
    of the pose; if fewer than local_count_threshold qualify it widens to
    global_radius. Ties on path cost prefer larger clusters, then the
    detect_frontiers ordering.
    """
    if not clusters:
        return None
    dists = [math.hypot(c.centroid[0] - pose.x, c.centroid[1] - pose.y) for c in clusters]
    local = [(c, i) for i, c in enumerate(clusters) if dists[i] <= cfg.local_radius]
    global_window = [(c, i) for i, c in enumerate(clusters) if dists[i] <= cfg.global_radius]
    if len(local) < cfg.local_count_threshold:
        local = global_window
    if not local and not global_window:
        return None
    if field is None:
        # the pose may sit inside a freshly inflated pocket; escape to the
        # nearest plannable cell, like a costmap recovery would
        snap = max(0.5, cfg.inflation_radius + 0.2)
        start = nearest_free_cell(inflated, (pose.x, pose.y), max_radius_m=snap)
        if start is None:
            return None
        field = DistanceField(inflated, start)

    def pick(window):
        best = None
        for cluster, order in window:
            goal = _candidate_goal(cluster, inflated)
            if goal is None:
                continue
            cost = field.cost_to(goal)
            if not math.isfinite(cost):
                continue
            key = (cost, -cluster.size, order)
            if best is None or key < best[0]:
                best = (key, goal, cluster)
        return best

    best = pick(local)
    if best is None and len(local) < len(global_window):
        # every local candidate is unplannable; widen the window
        best = pick(global_window)
    if best is None:
        return None
    goal = best[1]
    path = field.path_to(goal)
    assert path is not None
    return grid_to_world(goal, inflated.meta), path, best[2]


def _cluster_key(cluster: FrontierCluster, meta: GridMeta) -> tuple[int, int]:
    return world_to_grid(cluster.centroid, meta)


def explore(world: WorldModel, cfg: ExplorationConfig,
            mapping_params: MappingParams, motion: MotionParams,
            lidar: LidarParams, rng: np.random.Generator,
            pose_noise_sigma: float = 0.0,
            stats: dict | None = None) -> tuple[OccupancyGrid, Trajectory]:
    """Run the exploration loop; returns the final grid and the recorded trajectory.

    Each step senses and folds the scan into the grid; every
    motion.replan_period steps frontiers are re-detected and the target
    re-selected. Unreachable clusters are blacklisted for the rest of the
    run, as are clusters that survive being visited, which prevents
    oscillating on sensor shadows that can never resolve. When a dict is
    passed as stats it receives sim_time, frontier_count and terminated_by.
    """
    pose = world.robot_start
    grid = OccupancyGrid.empty(world.meta)
    sim_time = 0.0
    trajectory: Trajectory = [(0.0, pose)]
    next_record = cfg.record_period
    if stats is None:
        stats = {}
    stats.update(sim_time=0.0, frontier_count=0, terminated_by="time")

    scan = simulate_lidar(world, pose, lidar, rng)
    integrate_scan(grid, _noisy(pose, pose_noise_sigma, rng), scan, mapping_params)

    blacklist: set[tuple[int, int]] = set()
    path: Path | None = None
    goal_point: tuple[float, float] | None = None
    cluster_key: tuple[int, int] | None = None
    cluster_size = 0
    visit_streak = 0
    stall_pose, stall_count = pose, 0
    step = 0
    while sim_time < cfg.time_budget:
        if step % motion.replan_period == 0:
            trinary = to_trinary(grid, mapping_params)
            clusters = detect_frontiers(trinary, cfg.min_cluster_size)
            stats.update(frontier_count=len(clusters))
            if len(clusters) <= cfg.termination_frontier_threshold:
                stats.update(terminated_by="frontier_exhaustion")
                log.info("exploration done: %d frontier clusters at t=%.1fs",
                         len(clusters), sim_time)
                break
            if goal_point is not None and cluster_key is not None:
                reached = math.hypot(goal_point[0] - pose.x, goal_point[1] - pose.y) \
                    < 2 * world.meta.resolution
                survivor = next((c for c in clusters
                                 if _cluster_key(c, world.meta) == cluster_key), None)
                # a healthy frontier keeps changing size while the robot sits
                # at its goal (resolving or expanding with the map); one whose
                # size freezes is a sensor shadow that can never resolve
                if reached and survivor is not None and survivor.size == cluster_size:
                    visit_streak += 1
                    if visit_streak >= 2:
                        blacklist.add(cluster_key)
                        visit_streak = 0
                else:
                    visit_streak = 0
                if survivor is not None:
                    cluster_size = survivor.size
            inflated = inflate(trinary, cfg.inflation_radius)
            candidates = [c for c in clusters if _cluster_key(c, world.meta) not in blacklist]
            if not candidates:
                stats.update(terminated_by="no_reachable_frontier")
                log.info("exploration done: all %d remaining clusters blacklisted", len(clusters))
                break
            sel = select_frontier(candidates, pose, inflated, cfg)
            if sel is None:
                for c in candidates:
                    blacklist.add(_cluster_key(c, world.meta))
                path, goal_point, cluster_key = None, None, None
            else:
                prev_key = cluster_key
                goal_point, path, chosen = sel
                cluster_key = _cluster_key(chosen, world.meta)
                if prev_key != cluster_key:
                    cluster_size = chosen.size
                    visit_streak = 0
                if prev_key == cluster_key and pose.distance_to(stall_pose) < world.meta.resolution / 2 \
                        and math.hypot(goal_point[0] - pose.x, goal_point[1] - pose.y) >= 2 * world.meta.resolution:
                    stall_count += 1
                    if stall_count >= 4:
                        raise StuckError(
                            f"no progress toward frontier at {chosen.centroid} after repeated plans")
                else:
                    stall_count = 0
                stall_pose = pose
        if path:
            pose = follow_path(pose, path, motion)
        sim_time += motion.dt
        step += 1
        scan = simulate_lidar(world, pose, lidar, rng)
        integrate_scan(grid, _noisy(pose, pose_noise_sigma, rng), scan, mapping_params)
        if sim_time >= next_record - 1e-9:
            trajectory.append((sim_time, pose))
            next_record += cfg.record_period
    stats.update(sim_time=sim_time)
    return grid, trajectory


def _noisy(pose: Pose2D, sigma: float, rng: np.random.Generator) -> Pose2D:
    if sigma <= 0:
        return pose
    dx, dy = rng.normal(0.0, sigma, size=2)
    return Pose2D(pose.x + dx, pose.y + dy, pose.theta)


def save_trajectory(trajectory: Trajectory, path) -> None:
    """Persist as plain-text lines: t x y theta."""
    lines = [f"{t!r} {p.x!r} {p.y!r} {p.theta!r}" for t, p in trajectory]
    FsPath(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_trajectory(path) -> Trajectory:
    out: Trajectory = []
    for i, line in enumerate(FsPath(path).read_text(encoding="ascii").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{i}: expected 't x y theta', got {line!r}")
        t, x, y, theta = (float(v) for v in parts)
        out.append((t, Pose2D(x, y, theta)))
    return out
