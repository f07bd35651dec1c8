"""ROC analysis for membership scores.

AUC is computed from the threshold sweep with the trapezoid rule, kept in
integer counts until the final division. That makes it bit-identical to the
pairwise Mann-Whitney count (ties earn half credit) computed the slow way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from choiceleak.data import GroundTruth, Surface, SurfaceLabels, surface_labels
from choiceleak.errors import InputError


@dataclass(frozen=True, eq=False)
class RocReport:
    surface: Optional[Surface]
    auc: float
    curve: np.ndarray  # rows of (fpr, tpr, threshold), first threshold is +inf
    n_members: int
    n_nonmembers: int
    tpr_at: dict = field(default_factory=dict)
    counts: Optional[np.ndarray] = None  # rows of (fp, tp), same order as curve

    def to_dict(self) -> dict:
        return {
            "surface": None if self.surface is None else self.surface.value,
            "auc": self.auc,
            "n_members": self.n_members,
            "n_nonmembers": self.n_nonmembers,
            "tpr_at": {_level_key(k): v for k, v in self.tpr_at.items()},
            "curve": [
                [float(f), float(t), None if np.isinf(h) else float(h)] for f, t, h in self.curve
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RocReport":
        curve = np.array(
            [[f, t, np.inf if h is None else h] for f, t, h in d["curve"]], dtype=np.float64
        ).reshape(-1, 3)
        return cls(
            surface=None if d.get("surface") is None else Surface.parse(d["surface"]),
            auc=float(d["auc"]),
            curve=curve,
            n_members=int(d["n_members"]),
            n_nonmembers=int(d["n_nonmembers"]),
            tpr_at={float(k): float(v) for k, v in d.get("tpr_at", {}).items()},
        )


def _level_key(level: float) -> str:
    return repr(float(level))


def _coerce(scores, labels) -> tuple[np.ndarray, np.ndarray, Optional[Surface]]:
    s = np.asarray(getattr(scores, "s", scores), dtype=np.float64)
    surface = labels.surface if isinstance(labels, SurfaceLabels) else None
    y = np.asarray(getattr(labels, "labels", labels))
    if s.shape != y.shape or s.ndim != 1:
        raise InputError(f"scores {s.shape} and labels {y.shape} must be aligned 1-D arrays")
    if np.isnan(s).any():
        raise InputError("scores contain NaN")
    if not np.isin(y, [0, 1]).all():
        raise InputError("labels must be 0/1")
    return s, y.astype(np.int64), surface


def _sweep(s: np.ndarray, y: np.ndarray):
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tps = np.r_[0, tp[ends]]
    fps = np.r_[0, fp[ends]]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    return fps, tps, thresholds


def roc_auc(scores, labels) -> RocReport:
    s, y, surface = _coerce(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        which = f" for surface {surface.value}" if surface else ""
        raise InputError(
            f"ROC needs both members and nonmembers{which}; got {n_pos} members, {n_neg} nonmembers"
        )
    fps, tps, thresholds = _sweep(s, y)
    twice_area = int((np.diff(fps) * (tps[1:] + tps[:-1])).sum())
    auc = twice_area / (2 * n_pos * n_neg)
    curve = np.column_stack([fps / n_neg, tps / n_pos, thresholds])
    return RocReport(
        surface=surface,
        auc=auc,
        curve=curve,
        n_members=n_pos,
        n_nonmembers=n_neg,
        counts=np.column_stack([fps, tps]),
    )


def pairwise_auc(scores, labels) -> float:
    """Brute-force Mann-Whitney AUC over every member/nonmember pair."""
    s, y, _ = _coerce(scores, labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise InputError("need both members and nonmembers")
    twice = 2 * int((pos[:, None] > neg[None, :]).sum()) + int((pos[:, None] == neg[None, :]).sum())
    return twice / (2 * len(pos) * len(neg))


def tpr_at_fpr(report_or_scores, fpr_level: float, labels=None) -> float:
    """Best TPR among thresholds whose FPR does not exceed ``fpr_level``.

    Accepts a RocReport, or raw ``scores`` plus ``labels``. No interpolation
    between curve points.
    """
    if not 0 < fpr_level < 1:
        raise InputError(f"FPR level must lie in (0, 1), got {fpr_level}")
    report = report_or_scores
    if not isinstance(report, RocReport):
        if labels is None:
            raise InputError("raw scores need labels")
        report = roc_auc(report_or_scores, labels)
    fpr = report.curve[:, 0]
    tpr = report.curve[:, 1]
    ok = fpr <= fpr_level
    return float(tpr[ok].max())


def _with_levels(report: RocReport, levels: Iterable[float]) -> RocReport:
    tpr_at = {float(lv): tpr_at_fpr(report, float(lv)) for lv in levels}
    return RocReport(
        surface=report.surface,
        auc=report.auc,
        curve=report.curve,
        n_members=report.n_members,
        n_nonmembers=report.n_nonmembers,
        tpr_at=tpr_at,
        counts=report.counts,
    )


def assemble_report(
    scores,
    gt: GroundTruth,
    surfaces: Sequence = (Surface.TM, Surface.SP),
    fpr_levels: Sequence[float] = (0.05,),
    exclude: Iterable[int] = (),
) -> dict[Surface, RocReport]:
    """One RocReport per surface over every ground-truth id not in ``exclude``.

    ``scores`` is a ScoreTable (ids + scores). Every evaluated id must carry
    a score.
    """
    ids = np.asarray(scores.ids, dtype=np.int64)
    s = np.asarray(scores.s, dtype=np.float64)
    if len(np.unique(ids)) != len(ids):
        raise InputError("score table has duplicate ids")
    wanted = np.setdiff1d(np.arange(len(gt)), np.asarray(list(exclude), dtype=np.int64))
    missing = np.setdiff1d(wanted, ids)
    if missing.size:
        shown = ", ".join(str(i) for i in missing[:20])
        more = f" (+{missing.size - 20} more)" if missing.size > 20 else ""
        raise InputError(f"no score for ids: {shown}{more}")
    lookup = np.full(len(gt), np.nan)
    in_range = (ids >= 0) & (ids < len(gt))
    lookup[ids[in_range]] = s[in_range]
    out = {}
    for surf in surfaces:
        surf = Surface.parse(surf)
        lab = surface_labels(gt, surf)
        sub = SurfaceLabels(lab.labels[wanted], surf)
        out[surf] = _with_levels(roc_auc(lookup[wanted], sub), fpr_levels)
    return out
