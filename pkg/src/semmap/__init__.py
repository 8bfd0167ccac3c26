"""Deterministic 2D exploration, occupancy mapping and semantic object maps.

The pipeline mirrors a mobile-robot mapping stack: frontier exploration
builds a log-odds occupancy grid from simulated LiDAR; the recorded
trajectory is thinned into waypoints and ordered into a closed greedy
tour; driving the tour with a simulated object detector constructs a
topological object layer over the grid; re-driving it after scripted
world changes updates that layer online. Everything is seeded and
bitwise reproducible.
"""

from .geometry import (GridMeta, Pose2D, Transform3D, compose, grid_to_world,
                       lift_pose, transform_points, world_to_grid, wrap_angle)
from .world import GtObject, Polyline, Rect, ScenarioEvent, WorldModel, apply_scenario_events
from .sensors import (CameraParams, CategoryDetectorParams, Detection, DetectorParams,
                      LidarParams, LidarScan, raycast, simulate_detections,
                      simulate_lidar, visible_fraction)
from .mapping import (FREE, OCCUPIED, UNKNOWN, MappingParams, OccupancyGrid,
                      TrinaryGrid, inflate, integrate_scan, to_trinary)
from .map_io import load_map, save_map
from .navigation import MotionParams, Path, follow_path, plan_path
from .exploration import (ExplorationConfig, FrontierCluster, Trajectory,
                          detect_frontiers, explore, select_frontier)
from .traversal import Tour, WeightedGraph, build_graph, greedy_tsp, sample_waypoints
from .semantic_map import (AssociationThresholds, MapChange, ObjectNode, SemanticMap,
                           TopologicalMap, associate, construct, expected_nodes_in_fov,
                           insert_detection, load_semantic_map, mean_position,
                           points_to_map_frame, save_semantic_map, update_pass,
                           update_step)
from .evaluation import (APResult, MatchReport, average_precision, count_report,
                         match_to_gt, precision_recall)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
