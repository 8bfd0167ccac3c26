"""Log-odds occupancy grid built from scans, thresholding, and obstacle inflation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import OutOfBoundsError
from .geometry import GridMeta, Pose2D
from .sensors import LidarScan

# trinary cell states
UNKNOWN = np.int8(-1)
FREE = np.int8(0)
OCCUPIED = np.int8(1)


@dataclass(frozen=True)
class MappingParams:
    """Log-odds update increments, clamps and decision thresholds."""

    l_occ: float = 0.85
    l_free: float = -0.4
    l_min: float = -10.0
    l_max: float = 10.0
    occ_thresh: float = 2.0
    free_thresh: float = -2.0

    def __post_init__(self):
        if self.l_occ <= 0 or self.l_free >= 0:
            raise ValueError("l_occ must be positive and l_free negative")
        if not (self.l_min < self.free_thresh <= 0.0 <= self.occ_thresh < self.l_max):
            raise ValueError("need l_min < free_thresh <= 0 <= occ_thresh < l_max")


@dataclass
class OccupancyGrid:
    """Clamped log-odds raster; zero means no evidence."""

    meta: GridMeta
    cells: np.ndarray

    @staticmethod
    def empty(meta: GridMeta) -> "OccupancyGrid":
        return OccupancyGrid(meta=meta, cells=np.zeros(meta.shape, dtype=np.float64))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(meta=self.meta, cells=self.cells.copy())


@dataclass
class TrinaryGrid:
    """Raster of FREE / OCCUPIED / UNKNOWN cells.

    inflated_radius records how far obstacles in this grid have already
    been grown; it is transient bookkeeping (not persisted) that lets
    inflate() be a no-op on already-inflated grids.
    """

    meta: GridMeta
    cells: np.ndarray
    inflated_radius: float = 0.0

    @staticmethod
    def filled(meta: GridMeta, value: np.int8 = UNKNOWN) -> "TrinaryGrid":
        return TrinaryGrid(meta=meta, cells=np.full(meta.shape, value, dtype=np.int8))

    def copy(self) -> "TrinaryGrid":
        return TrinaryGrid(meta=self.meta, cells=self.cells.copy(),
                           inflated_radius=self.inflated_radius)

    def free_mask(self) -> np.ndarray:
        return self.cells == FREE

    def occupied_mask(self) -> np.ndarray:
        return self.cells == OCCUPIED

    def unknown_mask(self) -> np.ndarray:
        return self.cells == UNKNOWN


def integrate_scan(grid: OccupancyGrid, pose: Pose2D, scan: LidarScan,
                   params: MappingParams) -> OccupancyGrid:
    """Fold one scan into the grid in place (and return it).

    Cells a beam fully crosses get l_free; the endpoint cell gets l_occ
    when the range is strictly below the scan's max range. The endpoint
    cell is never given the free update, so occupied evidence is not
    diluted at obstacle boundaries.
    """
    meta = grid.meta
    if meta.origin.theta != 0.0:
        raise ValueError("scan integration requires an axis-aligned grid")
    x_min, x_max, y_min, y_max = meta.world_extent()
    if not (x_min <= pose.x < x_max and y_min <= pose.y < y_max):
        raise OutOfBoundsError(f"pose ({pose.x}, {pose.y}) outside grid extent")
    _kernels.carve_scan(grid.cells, pose.x, pose.y,
                        np.ascontiguousarray(scan.angles, dtype=np.float64),
                        np.ascontiguousarray(scan.ranges, dtype=np.float64),
                        scan.max_range, params.l_occ, params.l_free,
                        params.l_min, params.l_max,
                        meta.resolution, meta.origin.x, meta.origin.y)
    return grid


def to_trinary(grid: OccupancyGrid, params: MappingParams) -> TrinaryGrid:
    """Threshold log-odds into FREE / OCCUPIED / UNKNOWN (strict inequalities)."""
    cells = np.full(grid.meta.shape, UNKNOWN, dtype=np.int8)
    cells[grid.cells > params.occ_thresh] = OCCUPIED
    cells[grid.cells < params.free_thresh] = FREE
    return TrinaryGrid(meta=grid.meta, cells=cells)


def _disk(radius_m: float, resolution: float) -> np.ndarray:
    r_cells = int(math.floor(radius_m / resolution + 1e-9))
    if r_cells <= 0:
        return np.ones((1, 1), dtype=bool)
    span = np.arange(-r_cells, r_cells + 1)
    dx, dy = np.meshgrid(span, span)
    return (dx * dx + dy * dy) * resolution * resolution <= radius_m * radius_m + 1e-9


def inflate(grid: TrinaryGrid, radius_m: float) -> TrinaryGrid:
    """Grow occupied cells by a safety radius for planning.

    Every free cell whose center lies within radius_m of an occupied cell
    center becomes occupied; unknown cells pass through unchanged. Grids
    already inflated at least this far are returned as copies, so
    re-inflating a planning grid never compounds the growth.
    """
    if radius_m < 0:
        raise ValueError("inflation radius must be >= 0")
    if grid.inflated_radius >= radius_m:
        return grid.copy()
    disk = _disk(radius_m, grid.meta.resolution)
    cells = grid.cells.copy()
    if disk.shape != (1, 1):
        grown = ndimage.binary_dilation(grid.occupied_mask(), structure=disk)
        cells[grown & (cells == FREE)] = OCCUPIED
    return TrinaryGrid(meta=grid.meta, cells=cells,
                       inflated_radius=grid.inflated_radius + radius_m)
