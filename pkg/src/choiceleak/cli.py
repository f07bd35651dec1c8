"""Command-line front end.

    choiceleak simulate --out run/            # dataset + ground truth + manifest
    choiceleak attack   --out run/ --mode side
    choiceleak eval     --out run/ --surface tm,sp --fpr 0.05
    choiceleak sweep    --out run/ --axis ratio --values 0.2,0.4,0.6,0.8
    choiceleak report   --out run/            # figures + summary.csv

Settings come from defaults, then ``--config FILE`` (JSON), then flags.
Exit status: 0 ok, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from choiceleak import __version__, io, pipeline, plotting
from choiceleak.config import ATTACK_MODES, RunConfig, config_from_dict, load_config, with_overrides
from choiceleak.data import Surface
from choiceleak.errors import InputError

log = logging.getLogger("choiceleak")

SWEEP_AXES = {
    "ratio": ("ratio", float),
    "interval": ("window.interval", int),
    "k_clusters": ("attack.k_clusters", int),
    "shift": ("dataset.shift", float),
}


def _csv_list(text, cast):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--mode", choices=ATTACK_MODES, help="attack mode")
    p.add_argument("--surface", type=lambda s: _csv_list(s, str), help="comma list of tm,sp")
    p.add_argument("--fpr", type=lambda s: _csv_list(s, float), help="comma list of FPR levels")
    p.add_argument("--ratio", type=float, help="selection ratio r in (0, 1]")
    p.add_argument("--selector", help="selector kind: random, top_score, herding, k_center")
    p.add_argument("--invert", action="store_true", default=None, help="top_score keeps highest scores")
    p.add_argument("--shift", type=float, help="outside-pool mean shift (synthetic data)")
    p.add_argument("--dataset", help="dataset file (CSV or CLEB binary) instead of synthetic data")
    p.add_argument("--groundtruth", help="ground-truth CSV id,tag")
    p.add_argument("--shadow", help="shadow score CSV id,score,side (lira baseline)")
    p.add_argument("--window", type=int, help="window size W")
    p.add_argument("--interval", type=int, help="window interval")
    p.add_argument("--pad-to-multiple", action="store_true", default=None,
                   help="drop ids so the interval divides N (dropped ids are not scored)")
    p.add_argument("--k", type=int, dest="k_clusters", help="clusters per window (black mode)")
    p.add_argument("--kappa", type=float, help="sigmoid slope; enables the ratio-centred score")
    p.add_argument("--threads", type=int, help="worker cap (default: CHOICELEAK_THREADS or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")


def _overrides(args) -> dict:
    pairs = {
        "output_dir": args.out,
        "seed": args.seed,
        "attack.mode": args.mode,
        "surfaces": args.surface,
        "fpr_levels": args.fpr,
        "ratio": args.ratio,
        "selector.kind": args.selector,
        "selector.invert": args.invert,
        "dataset.shift": args.shift,
        "dataset.path": args.dataset,
        "dataset.groundtruth": args.groundtruth,
        "dataset.shadow": args.shadow,
        "window.size": args.window,
        "window.interval": args.interval,
        "window.pad_to_multiple": args.pad_to_multiple,
        "attack.k_clusters": args.k_clusters,
        "attack.kappa": args.kappa,
    }
    return {k: v for k, v in pairs.items() if v is not None}


def resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    return with_overrides(cfg, _overrides(args))


def _workers(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        return args.threads
    return pipeline.worker_count()


def _update_manifest(out: Path, cfg: RunConfig, stage: str, info: dict) -> None:
    path = out / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest["version"] = __version__
    manifest["config"] = cfg.resolved()
    manifest.setdefault("stages", {})[stage] = info
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _read_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    return json.loads(path.read_text()) if path.exists() else {}


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise InputError(f"{what} not found: {path}")
    return path


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = pipeline.simulate(cfg)
    io.write_dataset_binary(sim.dataset, out / "dataset.bin")
    io.write_dataset_csv(sim.dataset, out / "dataset.csv")
    io.write_groundtruth(sim.groundtruth, out / "groundtruth.csv")
    if sim.shadow:
        io.write_shadow_scores(sim.shadow, out / "shadow.csv")
    gt = sim.groundtruth
    _update_manifest(out, cfg, "simulate", {
        "n_samples": sim.dataset.size,
        "dim": sim.dataset.dim,
        "n_included": int(len(gt.included)),
        "n_excluded": int(len(gt.excluded)),
        "n_outside": int(len(gt.outside)),
    })
    print(f"wrote {sim.dataset.size} samples ({len(gt.included)} included, "
          f"{len(gt.excluded)} excluded, {len(gt.outside)} outside) to {out}")
    return 0


def cmd_attack(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds_path = Path(cfg.dataset.path) if cfg.dataset.path else _require(out / "dataset.bin", "dataset")
    dataset = io.read_dataset(ds_path)
    shadow = None
    if cfg.attack.mode == "lira":
        sh_path = Path(cfg.dataset.shadow) if cfg.dataset.shadow else _require(out / "shadow.csv", "shadow scores")
        shadow = io.read_shadow_scores(sh_path)
    result = pipeline.attack(cfg, dataset, shadow, workers=_workers(args))
    io.write_scores_csv(result.scores, out / "scores.csv")
    io.write_scores_json(result.scores, out / "scores.json")
    info = {"mode": cfg.attack.mode, "dataset": str(ds_path), "dropped_ids": [int(i) for i in result.dropped]}
    if result.ledger is not None:
        io.write_ledger(result.ledger, out / "ledger.csv", with_distance=cfg.attack.mode == "black")
        info["plan"] = result.plan.summary()
    _update_manifest(out, cfg, "attack", info)
    print(f"scored {len(result.scores.ids)} samples with mode={cfg.attack.mode} -> {out / 'scores.csv'}")
    return 0


def _table(reports, levels) -> str:
    head = ["surface", "auc"] + [f"tpr@{lv:g}" for lv in levels]
    lines = ["  ".join(f"{h:>10}" for h in head)]
    for surf, rep in reports.items():
        cells = [plotting.SURFACE_NAMES[surf.value], f"{rep.auc:.4f}"]
        cells += [f"{rep.tpr_at[float(lv)]:.4f}" for lv in levels]
        lines.append("  ".join(f"{c:>10}" for c in cells))
    return "\n".join(lines)


def cmd_eval(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    gt_path = Path(cfg.dataset.groundtruth) if cfg.dataset.groundtruth else out / "groundtruth.csv"
    _require(gt_path, "groundtruth")
    scores = io.read_scores_csv(_require(out / "scores.csv", "scores"))
    gt = io.read_groundtruth(gt_path)
    dropped = _read_manifest(out).get("stages", {}).get("attack", {}).get("dropped_ids", [])
    reports = pipeline.evaluate(cfg, scores, gt, dropped)
    for surf, rep in reports.items():
        io.write_report_json(rep, out / f"report_{surf.value}.json")
        io.write_roc_csv(rep, out / f"roc_{surf.value}.csv")
    _update_manifest(out, cfg, "eval", {
        surf.value: {"auc": rep.auc, "n_members": rep.n_members, "n_nonmembers": rep.n_nonmembers}
        for surf, rep in reports.items()
    })
    print(_table(reports, cfg.fpr_levels))
    return 0


def _sweep_point(cfg_dict: dict) -> list[dict]:
    cfg = config_from_dict(cfg_dict)
    reports = pipeline.run_once(cfg)
    rows = []
    for surf, rep in reports.items():
        row = {"surface": surf.value, "auc": rep.auc}
        row.update({f"tpr@{lv!r}": v for lv, v in rep.tpr_at.items()})
        rows.append(row)
    return rows


def run_sweep(cfg: RunConfig, axis: str, values, workers: int = 1) -> list[dict]:
    if axis not in SWEEP_AXES:
        raise InputError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if not values:
        raise InputError("sweep needs at least one value")
    key, cast = SWEEP_AXES[axis]
    mode = cfg.attack.mode
    if axis == "k_clusters" and mode != "black":
        raise InputError("axis k_clusters only applies to --mode black")
    if axis == "interval" and mode not in ("side", "black"):
        raise InputError(f"axis interval does not apply to mode {mode}")
    if axis == "shift" and cfg.dataset.path is not None:
        raise InputError("axis shift only applies to synthetic datasets")
    values = sorted(cast(v) for v in values)
    points = [with_overrides(cfg, {key: v}).to_dict() for v in values]
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
            results = list(pool.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]
    rows = []
    for v, point_rows in zip(values, results):
        for row in point_rows:
            rows.append({"value": v, **row})
    return rows


def _write_rows(rows, path, levels) -> None:
    cols = ["value", "surface", "auc"] + [f"tpr@{float(lv)!r}" for lv in levels]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, args.axis, args.values, workers=_workers(args))
    _write_rows(rows, out / "sweep.csv", cfg.fpr_levels)
    _update_manifest(out, cfg, "sweep", {"axis": args.axis, "values": sorted(args.values)})
    for r in rows:
        tprs = "  ".join(f"{k}={v:.4f}" for k, v in r.items() if k.startswith("tpr@"))
        print(f"{args.axis}={r['value']:<8g} {plotting.SURFACE_NAMES[r['surface']]}  auc={r['auc']:.4f}  {tprs}")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    reports = [io.read_report_json(p) for p in sorted(out.glob("report_*.json"))]
    sweep_path = out / "sweep.csv"
    if not reports and not sweep_path.exists():
        raise InputError(f"nothing to report in {out}: run eval or sweep first")
    figures = []
    if reports:
        figures.append(plotting.plot_roc(reports, out / "figures" / "roc.png"))
        figures.append(plotting.plot_roc(reports, out / "figures" / "roc_log.png", log_scale=True))
        levels = sorted({lv for r in reports for lv in r.tpr_at})
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["surface", "auc", "n_members", "n_nonmembers"] + [f"tpr@{lv!r}" for lv in levels])
            for r in reports:
                w.writerow([r.surface.value, repr(r.auc), r.n_members, r.n_nonmembers]
                           + [repr(r.tpr_at.get(lv, float("nan"))) for lv in levels])
    if sweep_path.exists():
        with open(sweep_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        axis = _read_manifest(out).get("stages", {}).get("sweep", {}).get("axis", "value")
        figures.append(plotting.plot_sweep(rows, axis, out / "figures" / "sweep_auc.png"))
        for col in [c for c in rows[0] if c.startswith("tpr@")] if rows else []:
            name = col.replace("@", "_at_")
            figures.append(plotting.plot_sweep(rows, axis, out / "figures" / f"sweep_{name}.png", metric=col))
    for f in figures:
        print(f"wrote {f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choiceleak", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
            p.add_argument("--values", required=True, type=lambda s: _csv_list(s, float),
                           help="comma list of axis values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
