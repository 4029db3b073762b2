"""Object-detection evaluation against COCO ground truth.

Reimplements the bounding-box protocol of the reference COCO evaluator:
greedy score-ordered matching per image and category, a 0.50:0.05:0.95
IoU threshold grid, 101-point interpolated average precision, and mean
recall capped at 100 detections per image and category.  Area-range
breakdowns are deliberately out of scope.

The arithmetic deliberately sticks to plain Python reductions (running
sums, ``sum(xs) / len(xs)``) so results are reproducible to the last bit
by a straightforward reference implementation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import CocoDocument, DetectionRecord
from .errors import EmptyGroundTruth

log = logging.getLogger(__name__)

# IoU grid 0.50:0.05:0.95, written as i/100 so each threshold is the
# nearest double to its decimal form
IOU_THRESHOLDS = tuple(i / 100 for i in range(50, 100, 5))
RECALL_POINTS = tuple(i / 100 for i in range(101))
MAX_DETECTIONS = 100

SUMMARY_FILENAME = "eval_summary.json"


@dataclass(frozen=True)
class EvalSummary:
    """COCO-style detection summary over one prediction set."""

    ap: float
    ap50: float
    ap75: float
    ar_100: float
    per_category_ap: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "AP": self.ap,
            "AP50": self.ap50,
            "AP75": self.ap75,
            "AR_100": self.ar_100,
            "per_category_AP": {str(k): v for k, v in sorted(self.per_category_ap.items())},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalSummary":
        return cls(
            ap=payload["AP"],
            ap50=payload["AP50"],
            ap75=payload["AP75"],
            ar_100=payload["AR_100"],
            per_category_ap={int(k): v for k, v in payload["per_category_AP"].items()},
        )


def iou(box_a: list[float], box_b: list[float]) -> float:
    """Intersection over union of two xywh boxes; 0 when the union is empty."""
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _crowd_iou(det_box: list[float], gt_box: list[float]) -> float:
    """Crowd regions score against the detection's own area, not the union."""
    ax, ay, aw, ah = det_box
    bx, by, bw, bh = gt_box
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    det_area = aw * ah
    return iw * ih / det_area if det_area > 0 else 0.0


def _match_image(
    dets: list[DetectionRecord],
    gts: list,
    thresholds: tuple[float, ...],
) -> list[tuple[float, int, list[bool], list[bool]]]:
    """Greedy matching for one (image, category) group.

    ``gts`` is ordered non-crowd first.  Returns one row per detection:
    (score, id, matched-per-threshold, ignored-per-threshold).  A
    detection absorbed by a crowd region is ignored rather than counted.
    """
    overlaps = [
        [(_crowd_iou if g.iscrowd else iou)(d.bbox, g.bbox) for g in gts] for d in dets
    ]
    rows = [(d.score, d.id, [False] * len(thresholds), [False] * len(thresholds)) for d in dets]
    for ti, thr in enumerate(thresholds):
        taken = [False] * len(gts)
        for di, det in enumerate(dets):
            best = thr
            match = -1
            for gi, g in enumerate(gts):
                if taken[gi] and not g.iscrowd:
                    continue
                # matched to a real box already; never trade it for a crowd
                if match >= 0 and not gts[match].iscrowd and g.iscrowd:
                    break
                if overlaps[di][gi] < best:
                    continue
                best = overlaps[di][gi]
                match = gi
            if match < 0:
                continue
            if gts[match].iscrowd:
                rows[di][3][ti] = True
            else:
                taken[match] = True
                rows[di][2][ti] = True
    return rows


def _average_precision(
    rows: list[tuple[float, int, list[bool], list[bool]]],
    n_gt: int,
    ti: int,
) -> tuple[float, float]:
    """(AP, max recall) at threshold index ``ti`` from matched rows."""
    tp = 0
    fp = 0
    recalls: list[float] = []
    precisions: list[float] = []
    for _score, _pid, matched, ignored in rows:
        if ignored[ti]:
            continue
        if matched[ti]:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / n_gt)
        precisions.append(tp / (tp + fp))

    # right-max envelope, then sample the 101 canonical recall points
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i] < precisions[i + 1]:
            precisions[i] = precisions[i + 1]
    sampled = []
    for r in RECALL_POINTS:
        value = 0.0
        for rec, prec in zip(recalls, precisions):
            if rec >= r:
                value = prec
                break
        sampled.append(value)
    ap = sum(sampled) / len(sampled)
    max_recall = recalls[-1] if recalls else 0.0
    return ap, max_recall


def evaluate(
    gt: CocoDocument,
    preds: list[DetectionRecord],
    *,
    iou_thresholds: tuple[float, ...] = IOU_THRESHOLDS,
    max_dets: int = MAX_DETECTIONS,
) -> EvalSummary:
    """Score predictions against ground truth.

    Categories with at least one non-crowd ground-truth box participate;
    predictions for unknown images or categories are logged and skipped.
    Detections are processed in descending score order, ties broken by
    ascending prediction id; on equal IoU the later ground-truth entry
    wins, mirroring the reference evaluator.
    """
    image_ids = {img.id for img in gt.images}
    gt_by_group: dict[tuple[int, int], list] = {}
    n_noncrowd: dict[int, int] = {}
    for ann in gt.annotations:
        gt_by_group.setdefault((ann.image_id, ann.category_id), []).append(ann)
        if not ann.iscrowd:
            n_noncrowd[ann.category_id] = n_noncrowd.get(ann.category_id, 0) + 1
    categories = sorted(n_noncrowd)
    if not categories:
        raise EmptyGroundTruth("ground truth has no non-crowd annotations")
    for group in gt_by_group.values():
        group.sort(key=lambda a: (bool(a.iscrowd), a.id))

    dets_by_group: dict[tuple[int, int], list[DetectionRecord]] = {}
    skipped = 0
    for det in preds:
        if det.image_id not in image_ids or det.category_id not in n_noncrowd:
            skipped += 1
            continue
        dets_by_group.setdefault((det.image_id, det.category_id), []).append(det)
    if skipped:
        log.warning("skipped %d prediction(s) referencing unknown images or categories", skipped)

    per_category_ap: dict[int, float] = {}
    ap50_parts: list[float] = []
    ap75_parts: list[float] = []
    ar_parts: list[float] = []
    for cat in categories:
        rows: list[tuple[float, int, list[bool], list[bool]]] = []
        for (img_id, cat_id), group in sorted(gt_by_group.items()):
            if cat_id != cat:
                continue
            dets = sorted(
                dets_by_group.get((img_id, cat_id), ()), key=lambda d: (-d.score, d.id)
            )[:max_dets]
            rows.extend(_match_image(dets, group, iou_thresholds))
        for (img_id, cat_id), dets in sorted(dets_by_group.items()):
            if cat_id == cat and (img_id, cat_id) not in gt_by_group:
                # image has no boxes of this category: everything is a miss
                dets = sorted(dets, key=lambda d: (-d.score, d.id))[:max_dets]
                rows.extend(_match_image(dets, [], iou_thresholds))
        rows.sort(key=lambda r: (-r[0], r[1]))

        ap_per_t = []
        recall_per_t = []
        for ti in range(len(iou_thresholds)):
            ap, recall = _average_precision(rows, n_noncrowd[cat], ti)
            ap_per_t.append(ap)
            recall_per_t.append(recall)
        per_category_ap[cat] = sum(ap_per_t) / len(ap_per_t)
        ap50_parts.append(ap_per_t[0])
        if 0.75 in iou_thresholds:
            ap75_parts.append(ap_per_t[iou_thresholds.index(0.75)])
        ar_parts.append(sum(recall_per_t) / len(recall_per_t))

    n_cat = len(categories)
    return EvalSummary(
        ap=sum(per_category_ap.values()) / n_cat,
        ap50=sum(ap50_parts) / n_cat,
        ap75=sum(ap75_parts) / n_cat if ap75_parts else 0.0,
        ar_100=sum(ar_parts) / n_cat,
        per_category_ap=per_category_ap,
    )


def save_eval_summary(summary: EvalSummary, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / SUMMARY_FILENAME
    path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def load_eval_summary(path: str | Path) -> EvalSummary:
    with open(path) as fh:
        return EvalSummary.from_dict(json.load(fh))
