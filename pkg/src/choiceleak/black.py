"""Black-box choice-leakage attack.

No selection metadata is available, so each window is clustered in
embedding space and samples close to their centroid (at or below the
window's median distance) count as "included". The final score divides
the sigmoid count weight by the sample's mean distance over those windows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from choiceleak.errors import InputError, IntegrityError
from choiceleak.side import EvidenceLedger, ScoreMode, ScoreTable, score_side
from choiceleak.windows import WindowPlan

ZERO_DISTANCE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    distances: np.ndarray
    inertia: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen centre
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[0])
        chosen.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-4) -> ClusterResult:
    """Lloyd's algorithm from k-means++ seeding.

    Stops once the labels repeat or the largest centroid move drops below
    ``tol``. A cluster that empties is re-seeded at the point currently
    farthest from its own centroid. ``history`` holds the inertia after
    every assignment step.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k > n:
        raise InputError(f"k={k} exceeds the number of points {n}")
    if max_iter < 1:
        raise InputError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise InputError(f"tol must be >= 0, got {tol}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus(x, k, rng)
    history = []
    prev = None
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        sq = _sq_dists(x, centroids)
        labels = sq.argmin(axis=1)
        own = sq[np.arange(n), labels]
        history.append(float(own.sum()))
        if prev is not None and np.array_equal(labels, prev):
            converged = True
            break

        updated = np.empty_like(centroids)
        counts = np.bincount(labels, minlength=k)
        spare = own.copy()
        for j in range(k):
            if counts[j]:
                updated[j] = x[labels == j].mean(axis=0)
            else:
                far = int(spare.argmax())
                updated[j] = x[far]
                spare[far] = -1.0
        move = np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max()
        centroids = updated
        prev = labels
        if move < tol:
            converged = True
            break

    sq = _sq_dists(x, centroids)
    labels = sq.argmin(axis=1)
    own = sq[np.arange(n), labels]
    inertia = float(own.sum())
    if not history or history[-1] != inertia:
        history.append(inertia)
    return ClusterResult(
        assignments=labels,
        centroids=centroids,
        distances=np.sqrt(own),
        inertia=inertia,
        n_iter=n_iter,
        converged=converged,
        history=history,
    )


def median_evidence(distances) -> np.ndarray:
    """1 where the distance is at most the ceil(|W|/2)-th smallest distance."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise InputError("window is empty")
    rank = -(-d.size // 2)
    cutoff = np.partition(d, rank - 1)[rank - 1]
    return (d <= cutoff).astype(np.int8)


def window_seed(base_seed: int, window_index: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(window_index)]).generate_state(1)[0])


def evidence_black(window_points, k: int = 5, seed: int = 0, max_iter: int = 100, tol: float = 1e-4):
    """Cluster one window; return (bits, distances) aligned with its rows."""
    pts = np.asarray(window_points, dtype=np.float64)
    if len(pts) == 0:
        raise InputError("window is empty")
    res = kmeans(pts, k, seed=seed, max_iter=max_iter, tol=tol)
    return median_evidence(res.distances), res.distances


def aggregate_black(plan: WindowPlan, records: Sequence[tuple]) -> EvidenceLedger:
    if len(records) != plan.n_windows:
        raise IntegrityError(f"expected {plan.n_windows} window records, got {len(records)}")
    ids = np.sort(plan.order)
    t = np.zeros(len(ids), dtype=np.int64)
    dist_sum = np.zeros(len(ids))
    for i, (bits, dist) in enumerate(records):
        bits = np.asarray(bits)
        dist = np.asarray(dist, dtype=np.float64)
        if bits.shape != (plan.window_size,) or dist.shape != (plan.window_size,):
            raise IntegrityError(f"record for window {i} is misaligned with the plan")
        pos = np.searchsorted(ids, plan.window(i))
        np.add.at(t, pos, bits.astype(np.int64))
        np.add.at(dist_sum, pos, np.where(bits == 1, dist, 0.0))
    return EvidenceLedger(ids, t, plan.exposure, dist_sum)


def score_black(t, n, d_bar):
    """w(t; n) / d_bar, with 0 for t == 0 and d_bar == 0 replaced by 1e-12."""
    t = np.asarray(t)
    d_bar = np.asarray(d_bar, dtype=np.float64)
    hit = t > 0
    if (d_bar[hit] < 0).any():
        raise InputError("mean distance must be >= 0")
    w = np.asarray(score_side(t, n), dtype=np.float64)
    denom = np.where(hit, np.where(d_bar == 0, ZERO_DISTANCE_EPS, d_bar), 1.0)
    out = np.where(hit, w / denom, 0.0)
    return out if out.ndim else float(out)


def run_black_attack(
    embeddings,
    plan: WindowPlan,
    k: int = 5,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
    workers: int = 1,
) -> tuple[EvidenceLedger, ScoreTable]:
    """Cluster every window of ``plan`` and score ids by centroid stability.

    ``embeddings`` is an (N, d) matrix indexed by sample id (a Dataset's
    feature matrix works). Window ``i`` is clustered with a seed derived
    from ``(seed, i)``.
    """
    emb = np.asarray(getattr(embeddings, "features", embeddings), dtype=np.float64)

    def one(i):
        return evidence_black(emb[plan.window(i)], k, window_seed(seed, i), max_iter, tol)

    if workers <= 1:
        records = [one(i) for i in range(plan.n_windows)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(plan.n_windows)))
    ledger = aggregate_black(plan, records)
    scores = score_black(ledger.t, ledger.n, ledger.d_bar)
    return ledger, ScoreTable(ledger.ids, np.asarray(scores, dtype=np.float64), ScoreMode.BLACK)
