"""Turn the exploration trajectory into a closed traversal tour.

Waypoints are thinned from the trajectory in time order with a minimum
pairwise separation, joined into a complete Euclidean graph, and ordered
by nearest-neighbour chaining from the start, closing back on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .exploration import Trajectory
from .geometry import Pose2D


@dataclass(frozen=True)
class WeightedGraph:
    """Complete graph over waypoints with symmetric Euclidean edge weights."""

    nodes: tuple[Pose2D, ...]
    weights: np.ndarray  # (n, n), zero diagonal

    def __post_init__(self):
        n = len(self.nodes)
        if self.weights.shape != (n, n):
            raise ValueError("weight matrix shape must match node count")


@dataclass(frozen=True)
class Tour:
    """Closed waypoint sequence: starts and ends at the first waypoint.

    order holds indices into the waypoint set; waypoints holds the
    corresponding poses, so len(order) == len(waypoints) == n + 1.
    """

    order: tuple[int, ...]
    waypoints: tuple[Pose2D, ...]
    total_length: float


def sample_waypoints(trajectory: Trajectory, min_sep: float = 2.0) -> list[Pose2D]:
    """Thin trajectory poses so every kept pair is at least min_sep apart.

    The first pose is always kept; later poses are kept only when far
    enough from everything already kept, preserving path order.
    """
    if not trajectory:
        raise ValueError("cannot sample waypoints from an empty trajectory")
    kept: list[Pose2D] = [trajectory[0][1]]
    for _, pose in trajectory[1:]:
        if all(pose.distance_to(k) >= min_sep for k in kept):
            kept.append(pose)
    return kept


def build_graph(waypoints: list[Pose2D]) -> WeightedGraph:
    """Full pairwise-distance matrix over the waypoints (xy plane)."""
    if not waypoints:
        raise ValueError("need at least one waypoint")
    xy = np.array([[p.x, p.y] for p in waypoints])
    diff = xy[:, None, :] - xy[None, :, :]
    weights = np.hypot(diff[..., 0], diff[..., 1])
    return WeightedGraph(nodes=tuple(waypoints), weights=weights)


def greedy_tsp(graph: WeightedGraph) -> Tour:
    """Nearest-neighbour tour from waypoint 0, closed back to it.

    At each step the unvisited waypoint with the smallest edge weight from
    the last appended one is taken; weight ties go to the smallest index.
    """
    n = len(graph.nodes)
    order = [0]
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    last = 0
    for _ in range(n - 1):
        w = graph.weights[last].copy()
        w[visited] = np.inf
        nxt = int(np.argmin(w))  # argmin takes the first (smallest index) on ties
        order.append(nxt)
        visited[nxt] = True
        last = nxt
    order.append(0)
    total = float(sum(graph.weights[a, b] for a, b in zip(order[:-1], order[1:])))
    return Tour(order=tuple(order),
                waypoints=tuple(graph.nodes[i] for i in order),
                total_length=total)


def tour_from_trajectory(trajectory: Trajectory, min_sep: float = 2.0) -> Tour:
    return greedy_tsp(build_graph(sample_waypoints(trajectory, min_sep)))


def save_tour(tour: Tour, path) -> None:
    """Persist as plain-text lines: index x y."""
    lines = [f"{i} {p.x!r} {p.y!r}" for i, p in zip(tour.order, tour.waypoints)]
    FsPath(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_tour(path) -> Tour:
    order: list[int] = []
    points: list[Pose2D] = []
    for ln, line in enumerate(FsPath(path).read_text(encoding="ascii").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln}: expected 'index x y', got {line!r}")
        order.append(int(parts[0]))
        points.append(Pose2D(float(parts[1]), float(parts[2]), 0.0))
    if not order:
        raise ValueError(f"{path}: empty tour file")
    total = sum(a.distance_to(b) for a, b in zip(points[:-1], points[1:]))
    return Tour(order=tuple(order), waypoints=tuple(points), total_length=total)
