"""Command-line pipeline driver.

Each subcommand runs one phase against a scenario file, writing artifacts
under the output directory so later phases can resume from disk:

    explore    map.pgm / map.yaml / trajectory.txt
    plan       tour.txt
    construct  semantic_map.json / changes_construct.jsonl
    update     semantic_map_<phase>.json / changes_<phase>.jsonl
    eval       report.json / report.txt / report.csv / report.png
    render     render[_<stage>].png
    run-all    every phase the scenario declares, plus renders

Exit codes: 0 success, 2 configuration error, 3 runtime error. Set
SEMMAP_LOG_LEVEL (DEBUG/INFO/WARNING/ERROR) to control log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .errors import ConfigError, MissingArtifactError, SemmapError
from .evaluation import (count_report, format_count_table, format_metrics_table,
                         map_average_precision, match_to_gt, precision_recall)
from .exploration import detect_frontiers, explore, load_trajectory, save_trajectory
from .mapping import FREE, to_trinary
from .map_io import load_map, save_map
from .scenario import Scenario, load_scenario
from .semantic_map import (construct, load_semantic_map, save_change_log,
                           save_semantic_map, update_pass)
from .traversal import load_tour, save_tour, tour_from_trajectory
from .world import apply_scenario_events

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} is missing; run the '{produced_by}' phase first")
    return path


def cmd_explore(scenario: Scenario, out: Path) -> None:
    stats: dict = {}
    t0 = time.perf_counter()
    grid, trajectory = explore(scenario.world, scenario.exploration, scenario.mapping,
                               scenario.motion, scenario.lidar, scenario.rng("explore"),
                               pose_noise_sigma=scenario.pose_noise_sigma, stats=stats)
    wall = time.perf_counter() - t0
    trinary = to_trinary(grid, scenario.mapping)
    save_map(trinary, out / "map.pgm", out / "map.yaml")
    save_trajectory(trajectory, out / "trajectory.txt")

    reachable = scenario.world.reachable_free_mask()
    covered = ((trinary.cells == FREE) & reachable).sum() / max(1, reachable.sum())
    print(f"explore: coverage {100.0 * covered:.1f}% of reachable free space, "
          f"sim time {stats['sim_time']:.1f}s, wall time {wall:.1f}s, "
          f"{stats['frontier_count']} frontier clusters at termination "
          f"({stats['terminated_by']}), {len(trajectory)} trajectory poses")


def cmd_plan(scenario: Scenario, out: Path) -> None:
    trajectory = load_trajectory(_require(out / "trajectory.txt", "explore"))
    tour = tour_from_trajectory(trajectory, scenario.traversal_min_sep)
    save_tour(tour, out / "tour.txt")
    print(f"plan: {len(tour.order) - 1} waypoints, tour length {tour.total_length:.1f} m")


def cmd_construct(scenario: Scenario, out: Path) -> None:
    occ = load_map(_require(out / "map.yaml", "explore"))
    tour = load_tour(_require(out / "tour.txt", "plan"))
    smap, changes = construct(scenario.world, occ, tour, scenario.camera,
                              scenario.detector, scenario.semantic.thresholds,
                              scenario.motion, scenario.rng("construct"),
                              inflation_radius=scenario.exploration.inflation_radius)
    save_semantic_map(smap, out / "semantic_map.json")
    save_change_log(changes, out / "changes_construct.jsonl")
    counts = ", ".join(f"{cat}: {n}" for cat, n in smap.topo.count_by_category().items())
    print(f"construct: {len(smap.topo)} nodes ({counts}), {len(changes)} changes")


def cmd_update(scenario: Scenario, out: Path, phase: str) -> None:
    if phase not in scenario.world.events:
        known = ", ".join(sorted(scenario.world.events)) or "(none)"
        raise ConfigError(f"update phase {phase!r} not defined; defined phases: {known}")
    smap = load_semantic_map(_require(out / "semantic_map.json", "construct"),
                             _require(out / "map.yaml", "explore"))
    tour = load_tour(_require(out / "tour.txt", "plan"))
    world = apply_scenario_events(scenario.world, phase)
    smap, changes = update_pass(world, smap, tour, scenario.camera, scenario.detector,
                                scenario.motion, scenario.rng(f"update:{phase}"),
                                inflation_radius=scenario.exploration.inflation_radius,
                                miss_limit=scenario.semantic.miss_limit,
                                los_margin=scenario.semantic.los_margin)
    save_semantic_map(smap, out / f"semantic_map_{phase}.json")
    save_change_log(changes, out / f"changes_{phase}.jsonl")
    added = sum(1 for c in changes if c.kind == "added")
    removed = sum(1 for c in changes if c.kind == "removed")
    print(f"update {phase}: {added} added, {removed} removed, {len(smap.topo)} nodes now")


def _eval_stages(scenario: Scenario, out: Path):
    """Yield (stage, world, semantic map) for every stage with artifacts on disk."""
    yaml_path = _require(out / "map.yaml", "explore")
    stages = [("construction", scenario.world,
               _require(out / "semantic_map.json", "construct"))]
    for phase in scenario.update_phases():
        json_path = out / f"semantic_map_{phase}.json"
        if json_path.exists():
            stages.append((phase, apply_scenario_events(scenario.world, phase), json_path))
    for stage, world, json_path in stages:
        yield stage, world, load_semantic_map(json_path, yaml_path)


def cmd_eval(scenario: Scenario, out: Path) -> None:
    from .render import render_eval

    stage_counts: dict = {}
    stage_metrics: dict = {}
    doc_stages = []
    for stage, world, smap in _eval_stages(scenario, out):
        counts = count_report(smap, world)
        report = match_to_gt(smap.topo, world, scenario.eval_match_radius)
        ap = map_average_precision(smap.topo, report)
        stage_counts[stage] = counts
        stage_metrics[stage] = (report, ap)
        cats = {}
        for cat, match in sorted(report.categories.items()):
            prec, rec = precision_recall(match.tp, match.fp, match.fn)
            cats[cat] = {
                "gt": counts.get(cat, (0, 0))[0],
                "mapped": counts.get(cat, (0, 0))[1],
                "tp": match.tp, "fp": match.fp, "fn": match.fn,
                "precision": prec, "recall": rec,
                "ap": ap.per_category.get(cat, 0.0),
            }
        doc_stages.append({"stage": stage, "categories": cats, "map": ap.mean_ap})

    text = ("Object counts (ground truth | mapped)\n"
            + format_count_table(stage_counts)
            + "\nDetection performance\n"
            + format_metrics_table(stage_metrics))
    (out / "report.txt").write_text(text, encoding="ascii")
    (out / "report.json").write_text(
        json.dumps({"scenario": scenario.name, "stages": doc_stages}, indent=2) + "\n",
        encoding="ascii")
    csv_lines = ["stage,category,gt,mapped,tp,fp,fn,precision,recall,ap"]
    for entry in doc_stages:
        for cat, row in entry["categories"].items():
            csv_lines.append(
                f"{entry['stage']},{cat},{row['gt']},{row['mapped']},{row['tp']},"
                f"{row['fp']},{row['fn']},{row['precision']:.6f},{row['recall']:.6f},"
                f"{row['ap']:.6f}")
    (out / "report.csv").write_text("\n".join(csv_lines) + "\n", encoding="ascii")
    render_eval(stage_counts, stage_metrics, out / "report.png",
                title=f"{scenario.name}: semantic map evaluation")
    print(text, end="")
    print(f"eval: wrote report.json / report.txt / report.csv / report.png in {out}")


def cmd_render(scenario: Scenario, out: Path, stage: str | None = None) -> None:
    from .render import render_map
    from .semantic_map import load_semantic_map as _load_sm

    occ = load_map(_require(out / "map.yaml", "explore"))
    tour = load_tour(out / "tour.txt") if (out / "tour.txt").exists() else None
    topo = None
    suffix = ""
    json_path = out / ("semantic_map.json" if stage in (None, "construction")
                       else f"semantic_map_{stage}.json")
    if stage is not None:
        _require(json_path, "construct" if stage == "construction" else f"update --phase {stage}")
    if json_path.exists():
        topo = _load_sm(json_path, out / "map.yaml").topo
        suffix = "" if stage in (None, "construction") else f"_{stage}"
    png = render_map(occ, out / f"render{suffix}.png", topo=topo, tour=tour,
                     title=f"{scenario.name}{' ' + stage if stage else ''}")
    print(f"render: wrote {png}")


def cmd_run_all(scenario: Scenario, out: Path) -> None:
    for phase in scenario.phases:
        if phase == "explore":
            cmd_explore(scenario, out)
        elif phase == "plan":
            cmd_plan(scenario, out)
        elif phase == "construct":
            cmd_construct(scenario, out)
            cmd_render(scenario, out, stage="construction")
        elif phase.startswith("update:"):
            name = phase.split(":", 1)[1]
            cmd_update(scenario, out, name)
            cmd_render(scenario, out, stage=name)
        elif phase == "eval":
            cmd_eval(scenario, out)
        else:  # unreachable: scenario loading validates phases
            raise ConfigError(f"unknown phase {phase!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semmap",
        description="Deterministic exploration, mapping and semantic-map pipeline")
    parser.add_argument("command",
                        choices=["explore", "plan", "construct", "update", "eval",
                                 "render", "run-all"])
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--phase", default=None,
                        help="update phase name (update) or stage to render (render)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SEMMAP_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario, seed_override=args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "explore":
            cmd_explore(scenario, out)
        elif args.command == "plan":
            cmd_plan(scenario, out)
        elif args.command == "construct":
            cmd_construct(scenario, out)
        elif args.command == "update":
            if not args.phase:
                raise ConfigError("update requires --phase <name>")
            cmd_update(scenario, out, args.phase)
        elif args.command == "eval":
            cmd_eval(scenario, out)
        elif args.command == "render":
            cmd_render(scenario, out, stage=args.phase)
        else:
            cmd_run_all(scenario, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SemmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
