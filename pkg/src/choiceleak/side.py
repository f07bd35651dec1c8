"""Side-channel choice-leakage attack.

The adversary knows the selector and the ratio. It replays the selector on
every window, counts how often each sample is chosen, and maps that count
through a sigmoid centred on the count expected under random choice.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from choiceleak.errors import InputError, IntegrityError
from choiceleak.selectors import SelectorSpec, select
from choiceleak.windows import WindowPlan


class ScoreMode(str, enum.Enum):
    SIDE = "side"
    SIDE_GENERAL = "side_general"
    BLACK = "black"
    BASELINE = "baseline"


@dataclass(frozen=True, eq=False)
class EvidenceLedger:
    """Per-id inclusion counts ``t`` out of ``n`` exposures.

    ``dist_sum`` accumulates assigned-centroid distances over the windows
    where the id earned evidence (black-box only; zeros otherwise).
    """

    ids: np.ndarray
    t: np.ndarray
    n: int
    dist_sum: np.ndarray

    def __post_init__(self):
        if not (len(self.ids) == len(self.t) == len(self.dist_sum)):
            raise IntegrityError("ledger columns differ in length")
        if len(self.t) and (self.t.min() < 0 or self.t.max() > self.n):
            raise IntegrityError("inclusion counts must lie in [0, n]")

    @property
    def d_bar(self) -> np.ndarray:
        """Mean distance over included windows; NaN where t == 0."""
        out = np.full(len(self.t), np.nan)
        hit = self.t > 0
        out[hit] = self.dist_sum[hit] / self.t[hit]
        return out


@dataclass(frozen=True, eq=False)
class ScoreTable:
    ids: np.ndarray
    s: np.ndarray
    mode: ScoreMode

    def __post_init__(self):
        if len(self.ids) != len(self.s):
            raise IntegrityError("score table columns differ in length")
        object.__setattr__(self, "mode", ScoreMode(self.mode))
        # sigmoid(u) rounds to exactly 1.0 in float64 once u > ~36.7
        if self.mode is ScoreMode.SIDE and len(self.s):
            if not ((self.s > 0) & (self.s <= 1)).all():
                raise IntegrityError("side-channel scores must lie in (0, 1]")

    def as_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "ids": [int(i) for i in self.ids],
            "scores": [float(v) for v in self.s],
        }


def sigmoid(u):
    u = np.asarray(u, dtype=np.float64)
    e = np.exp(-np.abs(u))
    out = np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def _check_counts(t, n):
    t = np.asarray(t)
    if np.ndim(n) == 0 and n < 1:
        raise InputError(f"exposure count must be >= 1, got {n}")
    if (t < 0).any() or (t > n).any():
        raise InputError(f"inclusion count must lie in [0, n={n}], got {t}")


def score_side(t, n):
    """sigmoid(t - n/2)."""
    _check_counts(t, n)
    return sigmoid(np.asarray(t, dtype=np.float64) - np.asarray(n) / 2.0)


def score_side_general(t, n, r: float, kappa: float = 1.0):
    """sigmoid(kappa * (t - r n)).

    The normalising constant that depends only on (n, r) is dropped: with a
    single exposure count and ratio it is shared by every sample and cannot
    change any ranking or threshold decision.
    """
    if not kappa > 0:
        raise InputError(f"kappa must be > 0, got {kappa}")
    if not 0 < r <= 1:
        raise InputError(f"ratio must lie in (0, 1], got {r}")
    _check_counts(t, n)
    return sigmoid(kappa * (np.asarray(t, dtype=np.float64) - r * np.asarray(n)))


def decide(scores, tau: float) -> np.ndarray:
    s = scores.s if isinstance(scores, ScoreTable) else np.asarray(scores)
    return (s >= tau).astype(np.int8)


def evidence_side(window, dataset, selector: SelectorSpec, r: float) -> np.ndarray:
    """One bit per window entry: 1 where the replayed selector keeps it."""
    window = np.asarray(window, dtype=np.int64)
    if window.size == 0:
        raise InputError("window is empty")
    chosen = select(selector, dataset, window, r)
    return np.isin(window, chosen).astype(np.int8)


def accumulate_counts(plan: WindowPlan, bits: Sequence[np.ndarray]) -> EvidenceLedger:
    if len(bits) != plan.n_windows:
        raise IntegrityError(f"expected {plan.n_windows} bit vectors, got {len(bits)}")
    ids = np.sort(plan.order)
    t = np.zeros(len(ids), dtype=np.int64)
    for i, b in enumerate(bits):
        b = np.asarray(b)
        if b.shape != (plan.window_size,):
            raise IntegrityError(f"bit vector for window {i} has shape {b.shape}")
        pos = np.searchsorted(ids, plan.window(i))
        np.add.at(t, pos, b.astype(np.int64))
    return EvidenceLedger(ids, t, plan.exposure, np.zeros(len(ids)))


def _map_windows(fn, plan: WindowPlan, workers: int):
    if workers <= 1:
        return [fn(w) for w in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, plan))


def run_side_attack(
    dataset,
    plan: WindowPlan,
    selector: SelectorSpec,
    r: float,
    kappa: Optional[float] = None,
    workers: int = 1,
) -> tuple[EvidenceLedger, ScoreTable]:
    """Replay ``selector`` on every window of ``plan`` and score each id.

    With ``kappa=None`` the simplified score sigmoid(t - n/2) is used;
    otherwise sigmoid(kappa (t - r n)).
    """
    bits = _map_windows(lambda w: evidence_side(w, dataset, selector, r), plan, workers)
    ledger = accumulate_counts(plan, bits)
    if kappa is None:
        table = ScoreTable(ledger.ids, score_side(ledger.t, ledger.n), ScoreMode.SIDE)
    else:
        table = ScoreTable(
            ledger.ids,
            score_side_general(ledger.t, ledger.n, r, kappa),
            ScoreMode.SIDE_GENERAL,
        )
    return ledger, table
