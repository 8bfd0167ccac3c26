"""Map-versus-ground-truth scoring: counts, TP/FP/FN and average precision.

Mapped nodes are matched one-to-one to ground-truth objects per category,
greedily in ascending planar distance, admitting pairs only within the
match radius. Average precision ranks nodes by confidence and integrates
the monotone precision envelope over recall (all-point interpolation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .semantic_map import SemanticMap, TopologicalMap
from .world import GtObject, WorldModel


@dataclass(frozen=True)
class CategoryMatch:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, str, float], ...]  # (node id, gt id, distance)


@dataclass(frozen=True)
class MatchReport:
    """Per-category matching outcome; count identities hold by construction."""

    categories: dict[str, CategoryMatch] = field(default_factory=dict)

    def totals(self) -> tuple[int, int, int]:
        tp = sum(c.tp for c in self.categories.values())
        fp = sum(c.fp for c in self.categories.values())
        fn = sum(c.fn for c in self.categories.values())
        return tp, fp, fn


@dataclass(frozen=True)
class APResult:
    per_category: dict[str, float]
    mean_ap: float


def _planar_distance(node_pos, gt: GtObject) -> float:
    return math.hypot(node_pos[0] - gt.center[0], node_pos[1] - gt.center[1])


def match_category(nodes, gts, match_radius: float) -> CategoryMatch:
    """Greedy ascending-distance one-to-one matching for one category.

    Candidate pairs within the radius are taken smallest distance first
    (ties by node id then gt id); leftovers count as FP (nodes) and FN
    (ground truth).
    """
    candidates = []
    for node in nodes:
        for gt in gts:
            d = _planar_distance(node.position, gt)
            if d <= match_radius:
                candidates.append((d, node.id, gt.id))
    candidates.sort()
    used_nodes: set[int] = set()
    used_gts: set[str] = set()
    pairs = []
    for d, node_id, gt_id in candidates:
        if node_id in used_nodes or gt_id in used_gts:
            continue
        used_nodes.add(node_id)
        used_gts.add(gt_id)
        pairs.append((node_id, gt_id, d))
    return CategoryMatch(tp=len(pairs), fp=len(nodes) - len(pairs),
                         fn=len(gts) - len(pairs), pairs=tuple(pairs))


def match_to_gt(topo: TopologicalMap, world: WorldModel,
                match_radius: dict[str, float] | float) -> MatchReport:
    """Match the whole node layer; match_radius may be one value or per category."""
    categories = sorted({o.category for o in world.objects} | {n.category for n in topo})
    report: dict[str, CategoryMatch] = {}
    for cat in categories:
        radius = match_radius if isinstance(match_radius, (int, float)) else match_radius[cat]
        if radius <= 0:
            raise ValueError(f"match radius for {cat!r} must be positive")
        report[cat] = match_category(topo.of_category(cat), world.objects_of(cat), radius)
    return MatchReport(categories=report)


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float, float]:
    """(precision, recall); a zero denominator yields 0 by convention."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return precision, recall


def average_precision(records: list[tuple[float, bool]], gt_count: int) -> float:
    """Area under the precision envelope over recall.

    records are (confidence, is_true_positive), ranked by descending
    confidence (ties keep input order). Recall is against gt_count; the
    precision envelope is the running maximum taken from the right, so the
    result depends only on the ranking, not the confidence values.
    """
    if gt_count < 0:
        raise ValueError("gt_count must be >= 0")
    if gt_count == 0 or not records:
        return 0.0
    ranked = sorted(enumerate(records), key=lambda item: (-item[1][0], item[0]))
    precisions = []
    recalls = []
    tp = 0
    for rank, (_, (_, is_tp)) in enumerate(ranked, start=1):
        if is_tp:
            tp += 1
        precisions.append(tp / rank)
        recalls.append(tp / gt_count)
    # monotone envelope from the right
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(precisions, recalls):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return ap


def map_average_precision(topo: TopologicalMap, report: MatchReport) -> APResult:
    """Per-category AP over confidence-ranked map nodes, TP per the match report."""
    per_category: dict[str, float] = {}
    for cat, match in sorted(report.categories.items()):
        matched_ids = {node_id for node_id, _, _ in match.pairs}
        nodes = topo.of_category(cat)
        records = [(n.confidence, n.id in matched_ids)
                   for n in sorted(nodes, key=lambda n: (-n.confidence, n.id))]
        per_category[cat] = average_precision(records, match.tp + match.fn)
    mean_ap = (sum(per_category.values()) / len(per_category)) if per_category else 0.0
    return APResult(per_category=per_category, mean_ap=mean_ap)


def count_report(smap: SemanticMap, world: WorldModel) -> dict[str, tuple[int, int]]:
    """Per category: (ground-truth count, mapped node count)."""
    gt_counts: dict[str, int] = {}
    for obj in world.objects:
        gt_counts[obj.category] = gt_counts.get(obj.category, 0) + 1
    node_counts = smap.topo.count_by_category()
    cats = sorted(set(gt_counts) | set(node_counts))
    return {c: (gt_counts.get(c, 0), node_counts.get(c, 0)) for c in cats}


# ---------------------------------------------------------------------------
# report formatting

def format_count_table(stages: dict[str, dict[str, tuple[int, int]]]) -> str:
    """Aligned text table of GT/mapped counts, one column pair per stage."""
    cats = sorted({c for counts in stages.values() for c in counts})
    header = ["Class"] + [f"{stage} GT|Map" for stage in stages]
    rows = []
    for cat in cats:
        row = [cat]
        for stage, counts in stages.items():
            gt, mapped = counts.get(cat, (0, 0))
            row.append(f"{gt}|{mapped}")
        rows.append(row)
    return _align([header] + rows)


def format_metrics_table(stages: dict[str, tuple[MatchReport, APResult]]) -> str:
    """Aligned text table of TP/FP/FN and AP per category and stage."""
    cats = sorted({c for report, _ in stages.values() for c in report.categories})
    header = ["Stage"] + [f"{c} TP/FP/FN" for c in cats] + [f"AP {c}" for c in cats] + ["mAP"]
    rows = []
    for stage, (report, ap) in stages.items():
        row = [stage]
        for c in cats:
            m = report.categories.get(c)
            row.append("-" if m is None else f"{m.tp}/{m.fp}/{m.fn}")
        for c in cats:
            row.append(f"{ap.per_category.get(c, 0.0):.2f}")
        row.append(f"{ap.mean_ap:.2f}")
        rows.append(row)
    return _align([header] + rows)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"
