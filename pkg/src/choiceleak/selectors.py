"""Subset selectors over feature vectors and model scores.

These are feature-space stand-ins for coreset/pruning methods: a seeded
uniform sampler, a least-confidence ranker, greedy mean-matching herding and
greedy farthest-point k-center. Every selector sorts its candidates by id
before doing any arithmetic, so the selected set never depends on the order
candidates arrive in and ties always go to the lowest id.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from choiceleak.errors import InputError


class SelectorKind(str, enum.Enum):
    RANDOM = "random"
    TOP_SCORE = "top_score"
    HERDING = "herding"
    K_CENTER = "k_center"


_ALIASES = {
    "random": SelectorKind.RANDOM,
    "topscore": SelectorKind.TOP_SCORE,
    "top_score": SelectorKind.TOP_SCORE,
    "uncertainty": SelectorKind.TOP_SCORE,
    "herding": SelectorKind.HERDING,
    "kcenter": SelectorKind.K_CENTER,
    "k_center": SelectorKind.K_CENTER,
}


@dataclass(frozen=True)
class SelectorSpec:
    """Which selector to run.

    ``seed`` only matters for ``random``. ``invert`` flips the score
    direction of ``top_score``: by default the lowest scores (least
    confident) are kept, with ``invert=True`` the highest.
    """

    kind: SelectorKind = SelectorKind.TOP_SCORE
    seed: int = 0
    invert: bool = False

    def __post_init__(self):
        kind = self.kind
        if not isinstance(kind, SelectorKind):
            key = str(kind).strip().lower().replace("-", "_")
            if key not in _ALIASES:
                raise InputError(
                    f"unknown selector kind {kind!r}; expected one of "
                    + ", ".join(k.value for k in SelectorKind)
                )
            object.__setattr__(self, "kind", _ALIASES[key])
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "invert", bool(self.invert))

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorSpec":
        unknown = set(d) - {"kind", "seed", "invert"}
        if unknown:
            raise InputError(f"unknown selector fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def selection_count(r: float, n: int) -> int:
    """``round(r * n)`` with ties to even, treating ``r`` as its decimal literal."""
    if not 0 < r <= 1:
        raise InputError(f"selection ratio must lie in (0, 1], got {r}")
    return int(round(Fraction(str(float(r))) * n))


def select_top_score(ids: np.ndarray, scores: np.ndarray, k: int, invert: bool = False) -> np.ndarray:
    if scores is None:
        raise InputError("top_score selection needs model scores")
    if k > len(ids):
        raise InputError(f"cannot select {k} of {len(ids)} candidates")
    key = -scores if invert else scores
    # lexsort: last key is primary
    order = np.lexsort((ids, key))
    return np.sort(ids[order[:k]])


def select_herding(ids: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """Greedy mean matching: each step adds the point that brings the
    running mean of the chosen set closest to the mean of all candidates."""
    if k > len(ids):
        raise InputError(f"cannot select {k} of {len(ids)} candidates")
    target = x.mean(axis=0)
    running = np.zeros(x.shape[1])
    taken = np.zeros(len(ids), dtype=bool)
    for step in range(k):
        gap = (((running + x) / (step + 1) - target) ** 2).sum(axis=1)
        gap[taken] = np.inf
        best = int(np.argmin(gap))
        taken[best] = True
        running += x[best]
    return ids[taken]


def select_k_center(ids: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """Greedy farthest-point k-center seeded at the point nearest the centroid."""
    if k > len(ids):
        raise InputError(f"cannot select {k} of {len(ids)} candidates")
    if k == 0:
        return ids[:0]
    centroid = x.mean(axis=0)
    first = int(np.argmin(((x - centroid) ** 2).sum(axis=1)))
    taken = np.zeros(len(ids), dtype=bool)
    taken[first] = True
    reach = ((x - x[first]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        reach[taken] = -np.inf
        nxt = int(np.argmax(reach))
        taken[nxt] = True
        reach = np.minimum(reach, ((x - x[nxt]) ** 2).sum(axis=1))
    return ids[taken]


def select_random(ids: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.sort(ids[rng.choice(len(ids), size=k, replace=False)])


def select(spec: SelectorSpec, dataset, candidates, r: float) -> np.ndarray:
    """Apply ``spec`` to ``candidates`` (ids into ``dataset``) at ratio ``r``.

    Returns the selected ids in ascending order; exactly
    ``selection_count(r, len(candidates))`` of them.
    """
    if not isinstance(spec, SelectorSpec):
        raise InputError(f"expected a SelectorSpec, got {type(spec).__name__}")
    ids = np.sort(np.asarray(candidates, dtype=np.int64))
    if ids.size == 0:
        raise InputError("no candidates to select from")
    if ids.size > 1 and (np.diff(ids) == 0).any():
        raise InputError("candidate ids must be unique")
    k = selection_count(r, ids.size)
    if k == ids.size:
        return ids
    kind = spec.kind
    if kind is SelectorKind.RANDOM:
        return select_random(ids, k, spec.seed)
    if kind is SelectorKind.TOP_SCORE:
        if dataset.scores is None:
            raise InputError("top_score selection needs model scores")
        return select_top_score(ids, dataset.scores[ids], k, spec.invert)
    if kind is SelectorKind.HERDING:
        return np.sort(select_herding(ids, dataset.features[ids], k))
    if kind is SelectorKind.K_CENTER:
        return np.sort(select_k_center(ids, dataset.features[ids], k))
    raise InputError(f"unknown selector kind {kind!r}")
