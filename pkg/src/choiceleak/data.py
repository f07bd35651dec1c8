"""Datasets, the simulated supply-chain partition, and synthetic data."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from choiceleak.errors import InputError

SCORE_NOISE_SIGMA = 0.1


class Tag(enum.IntEnum):
    OUTSIDE = 0
    INCLUDED = 1
    EXCLUDED = 2

    @classmethod
    def parse(cls, text: str) -> "Tag":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise InputError(f"unknown tag {text!r}") from None


class Surface(str, enum.Enum):
    TM = "tm"
    SP = "sp"

    @classmethod
    def parse(cls, text: "str | Surface") -> "Surface":
        if isinstance(text, Surface):
            return text
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise InputError(f"unknown surface {text!r}; expected tm or sp") from None


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: Optional[int] = None
    model_score: Optional[float] = None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered samples stored column-wise; sample ids are the row indices."""

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    scores: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise InputError(f"features must be a 2-D matrix, got shape {feats.shape}")
        n, d = feats.shape
        if n < 2:
            raise InputError(f"a dataset needs at least 2 samples, got {n}")
        if d < 1:
            raise InputError("feature dimension must be >= 1")
        object.__setattr__(self, "features", _frozen(feats))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise InputError("labels must have one entry per sample")
            object.__setattr__(self, "labels", _frozen(labels))
        if self.scores is not None:
            scores = np.asarray(self.scores, dtype=np.float64)
            if scores.shape != (n,):
                raise InputError("scores must have one entry per sample")
            object.__setattr__(self, "scores", _frozen(scores))

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.size)

    def __len__(self) -> int:
        return self.size

    def sample(self, i: int) -> Sample:
        return Sample(
            id=int(i),
            features=self.features[i],
            label=None if self.labels is None else int(self.labels[i]),
            model_score=None if self.scores is None else float(self.scores[i]),
        )

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(self.size)]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        for pos, s in enumerate(samples):
            if s.id != pos:
                raise InputError(f"sample ids must be dense 0..N-1, found id {s.id} at {pos}")
        feats = np.stack([np.atleast_1d(np.asarray(s.features, dtype=np.float64)) for s in samples])
        labels = scores = None
        if samples and all(s.label is not None for s in samples):
            labels = np.array([s.label for s in samples])
        if samples and all(s.model_score is not None for s in samples):
            scores = np.array([s.model_score for s in samples])
        return cls(feats, labels, scores)

    def equals(self, other: "Dataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            same(self.features, other.features)
            and same(self.labels, other.labels)
            and same(self.scores, other.scores)
        )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    tags: np.ndarray

    def __post_init__(self):
        tags = np.asarray(self.tags, dtype=np.int8)
        if tags.ndim != 1:
            raise InputError("tags must be one-dimensional")
        if not np.isin(tags, [t.value for t in Tag]).all():
            raise InputError("tags contain unknown values")
        object.__setattr__(self, "tags", _frozen(tags))

    def __len__(self) -> int:
        return len(self.tags)

    def ids(self, tag: Tag) -> np.ndarray:
        return np.flatnonzero(self.tags == tag)

    @property
    def included(self) -> np.ndarray:
        return self.ids(Tag.INCLUDED)

    @property
    def excluded(self) -> np.ndarray:
        return self.ids(Tag.EXCLUDED)

    @property
    def outside(self) -> np.ndarray:
        return self.ids(Tag.OUTSIDE)

    @property
    def pool(self) -> np.ndarray:
        return np.flatnonzero(self.tags != Tag.OUTSIDE)


@dataclass(frozen=True, eq=False)
class SurfaceLabels:
    labels: np.ndarray
    surface: Surface

    @property
    def n_members(self) -> int:
        return int(self.labels.sum())

    @property
    def n_nonmembers(self) -> int:
        return int(len(self.labels) - self.labels.sum())


def generate_synthetic(
    seed: int,
    n_pool: int,
    n_outside: int,
    dim: int,
    shift: float = 0.0,
    spread: float = 3.0,
) -> tuple[Dataset, np.ndarray]:
    """Draw a pool and an outside set from a unit-variance Gaussian mixture.

    Pool samples take ids ``0..n_pool-1`` and outside samples follow. The
    outside set uses the same mixture with every component mean moved by
    ``shift`` along the all-ones unit direction. Components are assigned in
    balanced round-robin order (then shuffled) so group means track the
    mixture mean closely even for small sets.

    ``model_score`` is a confidence proxy: minus the distance to the nearest
    unshifted component mean, divided by ``sqrt(dim)``, plus N(0, 0.1^2) noise.
    Features and scores are rounded to float32 precision so that both file
    formats round-trip exactly.

    Returns the dataset and a boolean mask marking pool membership.
    """
    if n_pool < 2:
        raise InputError(f"n_pool must be >= 2, got {n_pool}")
    if n_outside < 0:
        raise InputError(f"n_outside must be >= 0, got {n_outside}")
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    if not np.isfinite(shift) or shift < 0:
        raise InputError(f"shift must be a finite value >= 0, got {shift}")

    rng = np.random.default_rng(seed)
    k = max(2, min(10, dim))
    means = rng.normal(0.0, spread, size=(k, dim))
    direction = np.full(dim, 1.0 / np.sqrt(dim))

    def draw(count: int, offset: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        comp = rng.permutation(np.arange(count) % k)
        x = means[comp] + offset + rng.standard_normal((count, dim))
        return x, comp

    x_pool, c_pool = draw(n_pool, np.zeros(dim))
    x_out, c_out = draw(n_outside, shift * direction)
    feats = np.vstack([x_pool, x_out]).astype(np.float32).astype(np.float64)
    comps = np.concatenate([c_pool, c_out])

    nearest = np.sqrt(((feats[:, None, :] - means[None, :, :]) ** 2).sum(-1)).min(axis=1)
    noise = rng.normal(0.0, SCORE_NOISE_SIGMA, size=len(feats))
    scores = (-nearest / np.sqrt(dim) + noise).astype(np.float32).astype(np.float64)

    in_pool = np.zeros(len(feats), dtype=bool)
    in_pool[:n_pool] = True
    return Dataset(feats, comps, scores), in_pool


def partition_supply_chain(dataset: Dataset, pool_ids: Iterable[int], selector, r: float) -> GroundTruth:
    """Run ``selector`` over the pool; everything else is Outside."""
    from choiceleak.selectors import select

    pool = np.unique(np.asarray(list(pool_ids), dtype=np.int64))
    if pool.size == 0:
        raise InputError("selection pool is empty")
    if pool.min() < 0 or pool.max() >= dataset.size:
        raise InputError("pool ids fall outside the dataset")
    chosen = select(selector, dataset, pool, r)
    tags = np.full(dataset.size, Tag.OUTSIDE, dtype=np.int8)
    tags[pool] = Tag.EXCLUDED
    tags[chosen] = Tag.INCLUDED
    return GroundTruth(tags)


def surface_labels(gt: GroundTruth, surface: "Surface | str") -> SurfaceLabels:
    surface = Surface.parse(surface)
    if surface is Surface.TM:
        bits = gt.tags == Tag.INCLUDED
    else:
        bits = gt.tags != Tag.OUTSIDE
    return SurfaceLabels(_frozen(bits.astype(np.int8)), surface)
