"""Cyclic sliding windows with uniform exposure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from choiceleak.errors import InputError, IntegrityError


@dataclass(frozen=True, eq=False)
class WindowPlan:
    """``m = N / interval`` windows of ``window_size`` ids over a fixed ordering.

    Window ``i`` holds the ids at positions ``(i * interval + j) mod N`` of
    ``order`` for ``j`` in ``range(window_size)``, so every id is covered by
    exactly ``window_size / interval`` windows.
    """

    order: np.ndarray
    window_size: int
    interval: int
    shuffle_seed: Optional[int] = None

    @property
    def n_ids(self) -> int:
        return len(self.order)

    @property
    def n_windows(self) -> int:
        return self.n_ids // self.interval

    @property
    def exposure(self) -> int:
        return self.window_size // self.interval

    def window(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_windows:
            raise IndexError(f"window index {i} out of range")
        pos = (i * self.interval + np.arange(self.window_size)) % self.n_ids
        return self.order[pos]

    def __iter__(self):
        return (self.window(i) for i in range(self.n_windows))

    def __len__(self) -> int:
        return self.n_windows

    @property
    def windows(self) -> np.ndarray:
        """All windows as an ``(m, W)`` id matrix."""
        pos = (
            np.arange(self.n_windows)[:, None] * self.interval + np.arange(self.window_size)[None, :]
        ) % self.n_ids
        return self.order[pos]

    def summary(self) -> dict:
        return {
            "N": self.n_ids,
            "W": self.window_size,
            "interval": self.interval,
            "m": self.n_windows,
            "exposure": self.exposure,
            "shuffle_seed": self.shuffle_seed,
        }


def largest_valid_length(n: int, interval: int) -> int:
    """Largest N' <= n that ``interval`` divides (used by --pad-to-multiple)."""
    if interval < 1:
        raise InputError(f"interval must be >= 1, got {interval}")
    return n - n % interval


def build_window_plan(
    ids,
    window_size: int,
    interval: int,
    shuffle_seed: Optional[int] = None,
) -> WindowPlan:
    order = np.asarray(ids, dtype=np.int64)
    if order.ndim != 1:
        raise InputError("ids must be a flat sequence")
    n = len(order)
    if len(np.unique(order)) != n:
        raise InputError("ids must be unique")
    if interval < 1:
        raise InputError(f"interval must be >= 1, got {interval}")
    if window_size < 1:
        raise InputError(f"window size must be >= 1, got {window_size}")
    if window_size > n:
        raise InputError(f"window size {window_size} exceeds the number of ids {n}")
    if window_size % interval:
        raise InputError(f"interval {interval} must divide window size {window_size}")
    if n % interval:
        raise InputError(
            f"interval {interval} must divide the number of ids {n} "
            f"(largest valid length is {largest_valid_length(n, interval)}; see --pad-to-multiple)"
        )
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(order)
    order = order.copy()
    order.setflags(write=False)
    return WindowPlan(order, int(window_size), int(interval), shuffle_seed)


def exposure_count(plan: WindowPlan) -> int:
    """Return W / interval after confirming every id really occurs that often."""
    expected = plan.exposure
    counts = np.bincount(
        np.searchsorted(np.sort(plan.order), plan.windows.ravel()), minlength=plan.n_ids
    )
    if counts.min() != expected or counts.max() != expected:
        raise IntegrityError(
            f"non-uniform exposure: counts range {counts.min()}..{counts.max()}, expected {expected}"
        )
    return expected
