"""End-to-end runs: simulate the supply chain, attack it, evaluate the scores."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from choiceleak import baselines
from choiceleak.black import run_black_attack
from choiceleak.config import RunConfig
from choiceleak.data import Dataset, GroundTruth, Surface, Tag, generate_synthetic, partition_supply_chain
from choiceleak.errors import InputError
from choiceleak.evaluation import RocReport, assemble_report
from choiceleak.side import EvidenceLedger, ScoreMode, ScoreTable, run_side_attack
from choiceleak.windows import WindowPlan, build_window_plan, largest_valid_length

log = logging.getLogger(__name__)


def worker_count() -> int:
    raw = os.environ.get("CHOICELEAK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError(f"CHOICELEAK_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass
class Simulation:
    dataset: Dataset
    groundtruth: GroundTruth
    shadow: dict


@dataclass
class AttackResult:
    plan: Optional[WindowPlan]
    ledger: Optional[EvidenceLedger]
    scores: ScoreTable
    dropped: np.ndarray


def synthesize_shadow(cfg: RunConfig) -> dict:
    """Global shadow fit from an independent replica of the supply chain.

    The replica is drawn with ``seed + 1``; its Included scores are the
    member side, Excluded and Outside the nonmember side.
    """
    ds = cfg.dataset
    replica, in_pool = generate_synthetic(cfg.seed + 1, ds.n_pool, ds.n_outside, ds.dim, ds.shift, ds.spread)
    gt = partition_supply_chain(replica, np.flatnonzero(in_pool), cfg.selector_spec, cfg.ratio)
    member = gt.tags == Tag.INCLUDED
    return {None: baselines.ShadowScores(replica.scores[member].tolist(), replica.scores[~member].tolist())}


def simulate(cfg: RunConfig, dataset: Optional[Dataset] = None) -> Simulation:
    """Build (or take) the dataset and partition its pool with the configured selector.

    Synthetic datasets put the pool first; an external dataset treats its
    first ``dataset.n_pool`` ids as the pool.
    """
    ds_cfg = cfg.dataset
    if dataset is None:
        if ds_cfg.path is not None:
            from choiceleak.io import read_dataset

            dataset = read_dataset(ds_cfg.path)
        else:
            dataset, _ = generate_synthetic(
                cfg.seed, ds_cfg.n_pool, ds_cfg.n_outside, ds_cfg.dim, ds_cfg.shift, ds_cfg.spread
            )
    if ds_cfg.n_pool > dataset.size:
        raise InputError(f"config.dataset.n_pool={ds_cfg.n_pool} exceeds dataset size {dataset.size}")
    gt = partition_supply_chain(dataset, np.arange(ds_cfg.n_pool), cfg.selector_spec, cfg.ratio)
    shadow = synthesize_shadow(cfg) if ds_cfg.path is None and dataset.scores is not None else {}
    return Simulation(dataset, gt, shadow)


def make_plan(cfg: RunConfig, n_ids: int) -> tuple[WindowPlan, np.ndarray]:
    """Window plan over ids ``0..n_ids-1``; returns the plan and any dropped ids."""
    ids = np.arange(n_ids)
    dropped = ids[:0]
    if cfg.window.pad_to_multiple:
        keep = largest_valid_length(n_ids, cfg.window.interval)
        if keep < n_ids:
            order = np.random.default_rng(cfg.shuffle_seed).permutation(ids)
            dropped = np.sort(order[keep:])
            ids = np.sort(order[:keep])
            log.warning(
                "pad-to-multiple: dropping %d of %d ids so the interval %d divides N; "
                "dropped ids get no score and are left out of evaluation",
                len(dropped), n_ids, cfg.window.interval,
            )
    plan = build_window_plan(ids, cfg.window.size, cfg.window.interval, cfg.shuffle_seed)
    return plan, dropped


def attack(
    cfg: RunConfig,
    dataset: Dataset,
    shadow: Optional[dict] = None,
    workers: int = 1,
) -> AttackResult:
    mode = cfg.attack.mode
    ids = dataset.ids
    if mode == "loss":
        if dataset.scores is None:
            raise InputError("loss baseline needs model scores in the dataset")
        s = baselines.attack_loss(baselines.loss_proxy(dataset.scores))
        return AttackResult(None, None, ScoreTable(ids, s, ScoreMode.BASELINE), ids[:0])
    if mode == "lira":
        if dataset.scores is None:
            raise InputError("lira baseline needs model scores in the dataset")
        if not shadow:
            raise InputError("lira baseline needs shadow scores (config.dataset.shadow)")
        s = baselines.gaussian_lr_table(ids, dataset.scores, shadow)
        return AttackResult(None, None, ScoreTable(ids, s, ScoreMode.BASELINE), ids[:0])

    plan, dropped = make_plan(cfg, dataset.size)
    if mode == "side":
        ledger, table = run_side_attack(
            dataset, plan, cfg.selector_spec, cfg.ratio, kappa=cfg.attack.kappa, workers=workers
        )
    elif mode == "black":
        ledger, table = run_black_attack(
            dataset,
            plan,
            k=cfg.attack.k_clusters,
            seed=cfg.kmeans_seed,
            max_iter=cfg.attack.kmeans_max_iter,
            tol=cfg.attack.kmeans_tol,
            workers=workers,
        )
    else:
        raise InputError(f"unknown attack mode {mode!r}")
    return AttackResult(plan, ledger, table, dropped)


def evaluate(cfg: RunConfig, scores: ScoreTable, gt: GroundTruth, dropped=()) -> dict[Surface, RocReport]:
    return assemble_report(scores, gt, cfg.surfaces, cfg.fpr_levels, exclude=dropped)


def run_once(cfg: RunConfig, workers: int = 1) -> dict[Surface, RocReport]:
    """Simulate, attack and evaluate one configuration in memory."""
    sim = simulate(cfg)
    result = attack(cfg, sim.dataset, sim.shadow, workers=workers)
    return evaluate(cfg, result.scores, sim.groundtruth, result.dropped)
