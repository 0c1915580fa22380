"""Greedy NBV selection over a fixed set of posed images."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .camera import CameraView, _read_pose_rows, write_cameras
from .fitness import FitnessContext, commit_view, heuristic_function, score_candidate

log = logging.getLogger(__name__)

LABEL_PREFIX = "sees_manikin_"


@dataclass(frozen=True, eq=False)
class PosedImageRecord:
    id: str
    camera: CameraView
    labels: Optional[Dict[int, bool]] = None


def id_key(image_id: str):
    """Sort key: numeric ids numerically, before any non-numeric ids."""
    s = str(image_id)
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


def load_dataset(path) -> List[PosedImageRecord]:
    """Read a pose CSV with optional ``sees_manikin_<j>`` label columns."""
    ids, cams, extras = _read_pose_rows(path, extra_prefix=LABEL_PREFIX)
    records = []
    for rid, cam, extra in zip(ids, cams, extras):
        labels = {int(k[len(LABEL_PREFIX):]): bool(v) for k, v in extra.items()} or None
        records.append(PosedImageRecord(rid, cam, labels))
    log.info("loaded %d posed images from %s", len(records), path)
    return records


def write_dataset(path, records: Sequence[PosedImageRecord]) -> None:
    extra = [{f"{LABEL_PREFIX}{j}": int(v) for j, v in (r.labels or {}).items()} for r in records]
    write_cameras(path, [r.camera for r in records], [r.id for r in records], extra)


@dataclass
class Selection:
    """Outcome of :func:`brute_force_nbv`."""

    ids: List[str]
    fitness: List[float]
    context: FitnessContext
    trace: List[Tuple[int, str, float, float]] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "image_id", "fitness"])
            for step, (i, f) in enumerate(zip(self.ids, self.fitness), start=1):
                w.writerow([step, i, repr(f)])


def brute_force_nbv(ctx: FitnessContext, candidates: Sequence[PosedImageRecord], heuristic: str,
                    n_views: int, trace: bool = False) -> Selection:
    """Score every unselected candidate, commit the best, repeat ``n_views`` times.

    Ties go to the lowest id. With ``trace`` both heuristics are recorded for
    every candidate at every step (slower).
    """
    if n_views < 1:
        raise ValueError("n_views must be at least 1")
    if len(candidates) < n_views:
        raise ValueError(f"{len(candidates)} candidates cannot supply {n_views} views")
    fit = heuristic_function(heuristic)
    pool = sorted(candidates, key=lambda r: id_key(r.id))
    ids, scores, rows = [], [], []
    for step in range(1, n_views + 1):
        best, best_score = None, None
        for rec in pool:
            if trace:
                jv, jd = score_candidate(ctx, rec.camera)
                rows.append((step, rec.id, jv, jd))
                s = jv if heuristic == "visibility" else jd
            else:
                s = fit(ctx, rec.camera)
            if best is None or s > best_score:
                best, best_score = rec, s
        ctx = commit_view(ctx, best.camera)
        pool = [r for r in pool if r is not best]
        ids.append(best.id)
        scores.append(float(best_score))
        log.info("step %d: selected %s (%.6g)", step, best.id, best_score)
    return Selection(ids, scores, ctx, rows)


@dataclass
class LabelReport:
    counts: Dict[int, int]
    unlabeled: List[str]

    @property
    def n_manikins(self) -> int:
        return len(self.counts)

    @property
    def n_seen(self) -> int:
        return sum(1 for c in self.counts.values() if c > 0)

    def summary(self) -> str:
        if not self.counts:
            return "unlabeled"
        return f"{self.n_seen} of {self.n_manikins} manikins seen"

    def to_dict(self) -> dict:
        return {"counts": {str(k): v for k, v in sorted(self.counts.items())},
                "n_seen": self.n_seen, "n_manikins": self.n_manikins,
                "unlabeled": self.unlabeled, "summary": self.summary()}


def label_report(selected_ids: Sequence[str], records: Sequence[PosedImageRecord]) -> LabelReport:
    """Per manikin, how many selected images are labelled as showing it.

    Selected images without labels are listed in ``unlabeled``.
    """
    by_id = {r.id: r for r in records}
    manikins = sorted({j for r in records if r.labels for j in r.labels})
    counts = {j: 0 for j in manikins}
    unlabeled = []
    for sid in selected_ids:
        rec = by_id[sid]
        if not rec.labels:
            unlabeled.append(sid)
            continue
        for j, seen in rec.labels.items():
            counts[j] += int(seen)
    return LabelReport(counts, unlabeled)
