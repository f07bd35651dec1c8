"""Reference membership attacks: loss threshold and a two-Gaussian likelihood ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from choiceleak.errors import InputError

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ShadowScores:
    member_scores: Sequence[float]
    nonmember_scores: Sequence[float]


def attack_loss(loss):
    """Negated loss: lower loss reads as more member-like."""
    loss = np.asarray(loss, dtype=np.float64)
    if not np.isfinite(loss).all():
        raise InputError("loss values must be finite")
    out = -loss
    return out if out.ndim else float(out)


def _fit(values, side: str) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise InputError(f"need at least 2 {side} shadow scores, got {v.size}")
    return float(v.mean()), max(float(v.var(ddof=1)), VARIANCE_FLOOR)


def _log_normal(x, mu, var):
    return -0.5 * (math.log(2 * math.pi * var) + (x - mu) ** 2 / var)


def attack_gaussian_lr(target_score, shadow: ShadowScores):
    """log N(target | member fit) - log N(target | nonmember fit)."""
    mu_in, var_in = _fit(shadow.member_scores, "member")
    mu_out, var_out = _fit(shadow.nonmember_scores, "nonmember")
    x = np.asarray(target_score, dtype=np.float64)
    out = _log_normal(x, mu_in, var_in) - _log_normal(x, mu_out, var_out)
    return out if np.ndim(out) else float(out)


def gaussian_lr_table(
    ids,
    target_scores,
    shadow: Mapping[Optional[int], ShadowScores],
) -> np.ndarray:
    """Score every target, preferring a per-id shadow fit over the global one.

    ``shadow`` maps sample id to its own shadow scores; the ``None`` key
    holds the pooled fallback.
    """
    out = np.empty(len(ids))
    for pos, (i, s) in enumerate(zip(ids, target_scores)):
        fit = shadow.get(int(i), shadow.get(None))
        if fit is None:
            raise InputError(f"no shadow scores for id {int(i)} and no global fallback")
        out[pos] = attack_gaussian_lr(float(s), fit)
    return out


def loss_proxy(confidence) -> np.ndarray:
    """Map a higher-is-better confidence score to a non-negative loss, softplus(-c)."""
    c = np.asarray(confidence, dtype=np.float64)
    return np.logaddexp(0.0, -c)
