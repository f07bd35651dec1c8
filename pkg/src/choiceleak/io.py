"""Readers and writers for datasets, ground truth, scores, ledgers and reports.

Binary dataset layout (little-endian)::

    b"CLEB" | u32 version=1 | u64 rows | u32 dim | u32 flags
    rows x (f32[dim] features [, i32 label] [, f32 score])

flags bit 0 marks labels, bit 1 marks scores.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from choiceleak.baselines import ShadowScores
from choiceleak.data import Dataset, GroundTruth, Tag
from choiceleak.errors import InputError
from choiceleak.evaluation import RocReport
from choiceleak.side import EvidenceLedger, ScoreMode, ScoreTable

MAGIC = b"CLEB"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")
HAS_LABEL = 1
HAS_SCORE = 2


def _fmt(v: float) -> str:
    return repr(float(v))


def _row_dtype(dim: int, flags: int) -> np.dtype:
    fields = [("features", "<f4", (dim,))]
    if flags & HAS_LABEL:
        fields.append(("label", "<i4"))
    if flags & HAS_SCORE:
        fields.append(("score", "<f4"))
    return np.dtype(fields)


def write_dataset_binary(ds: Dataset, path) -> None:
    flags = (HAS_LABEL if ds.labels is not None else 0) | (HAS_SCORE if ds.scores is not None else 0)
    rows = np.zeros(ds.size, dtype=_row_dtype(ds.dim, flags))
    rows["features"] = ds.features
    if ds.labels is not None:
        rows["label"] = ds.labels
    if ds.scores is not None:
        rows["score"] = ds.scores
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ds.size, ds.dim, flags))
        fh.write(rows.tobytes())


def read_dataset_binary(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: file too short for a dataset header")
    magic, version, n, dim, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise InputError(f"{path}: unsupported version {version}")
    if flags & ~(HAS_LABEL | HAS_SCORE):
        raise InputError(f"{path}: unknown flag bits {flags:#x}")
    dtype = _row_dtype(dim, flags)
    body = raw[_HEADER.size:]
    if len(body) != n * dtype.itemsize:
        raise InputError(f"{path}: expected {n} rows of {dtype.itemsize} bytes, got {len(body)} bytes")
    rows = np.frombuffer(body, dtype=dtype, count=n)
    return Dataset(
        rows["features"].astype(np.float64).reshape(n, dim),
        rows["label"].astype(np.int64) if flags & HAS_LABEL else None,
        rows["score"].astype(np.float64) if flags & HAS_SCORE else None,
    )


def write_dataset_csv(ds: Dataset, path) -> None:
    header = ["id"] + [f"feat_{j}" for j in range(ds.dim)]
    if ds.labels is not None:
        header.append("label")
    if ds.scores is not None:
        header.append("score")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.size):
            row = [str(i)] + [_fmt(v) for v in ds.features[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            if ds.scores is not None:
                row.append(_fmt(ds.scores[i]))
            w.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "id":
        raise InputError(f"{path}: first column must be 'id'")
    feat_cols = [i for i, h in enumerate(header) if h.startswith("feat_")]
    for j, col in enumerate(feat_cols):
        if header[col] != f"feat_{j}":
            raise InputError(f"{path}: feature columns must be feat_0..feat_{{d-1}} in order")
    extra = [h for h in header[1 + len(feat_cols):]]
    if extra not in ([], ["label"], ["score"], ["label", "score"]):
        raise InputError(f"{path}: unexpected trailing columns {extra}")
    body = rows[1:]
    try:
        ids = np.array([int(r[0]) for r in body])
        feats = np.array([[float(r[c]) for c in feat_cols] for r in body], dtype=np.float64)
        labels = np.array([int(r[header.index("label")]) for r in body]) if "label" in extra else None
        scores = np.array([float(r[header.index("score")]) for r in body]) if "score" in extra else None
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed row ({exc})") from None
    if not np.array_equal(ids, np.arange(len(ids))):
        raise InputError(f"{path}: ids must be dense 0..N-1 in file order")
    return Dataset(feats.reshape(len(body), len(feat_cols)), labels, scores)


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_dataset_binary(path)
    return read_dataset_csv(path)


def write_groundtruth(gt: GroundTruth, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "tag"])
        for i, tag in enumerate(gt.tags):
            w.writerow([i, Tag(int(tag)).name.lower()])


def read_groundtruth(path) -> GroundTruth:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "tag"]:
            raise InputError(f"{path}: expected header id,tag")
        rows = list(reader)
    ids = [int(r["id"]) for r in rows]
    if ids != list(range(len(ids))):
        raise InputError(f"{path}: ids must be dense 0..N-1")
    return GroundTruth(np.array([Tag.parse(r["tag"]) for r in rows], dtype=np.int8))


def write_scores_csv(table: ScoreTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score"])
        for i, s in zip(table.ids, table.s):
            w.writerow([int(i), _fmt(s)])


def read_scores_csv(path, mode: ScoreMode = ScoreMode.BASELINE) -> ScoreTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "score"]:
            raise InputError(f"{path}: expected header id,score")
        rows = list(reader)
    return ScoreTable(
        np.array([int(r["id"]) for r in rows], dtype=np.int64),
        np.array([float(r["score"]) for r in rows], dtype=np.float64),
        mode,
    )


def write_scores_json(table: ScoreTable, path) -> None:
    Path(path).write_text(json.dumps(table.as_dict(), indent=1) + "\n", encoding="utf-8")


def read_scores_json(path) -> ScoreTable:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return ScoreTable(np.array(d["ids"], dtype=np.int64), np.array(d["scores"], dtype=np.float64), d["mode"])


def write_ledger(ledger: EvidenceLedger, path, with_distance: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "t", "n"] + (["dbar"] if with_distance else []))
        dbar = ledger.d_bar
        for pos, i in enumerate(ledger.ids):
            row = [int(i), int(ledger.t[pos]), int(ledger.n)]
            if with_distance:
                row.append("" if np.isnan(dbar[pos]) else _fmt(dbar[pos]))
            w.writerow(row)


def read_ledger(path) -> EvidenceLedger:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames not in (["id", "t", "n"], ["id", "t", "n", "dbar"]):
            raise InputError(f"{path}: expected header id,t,n[,dbar]")
        rows = list(reader)
    ids = np.array([int(r["id"]) for r in rows], dtype=np.int64)
    t = np.array([int(r["t"]) for r in rows], dtype=np.int64)
    ns = {int(r["n"]) for r in rows}
    if len(ns) != 1:
        raise InputError(f"{path}: exposure count must be constant")
    dbar = np.array([float(r.get("dbar") or "nan") for r in rows])
    dist_sum = np.where(np.isnan(dbar), 0.0, dbar * t)
    return EvidenceLedger(ids, t, ns.pop(), dist_sum)


def read_shadow_scores(path) -> dict:
    """Load ``id,score,side`` rows. Rows with an empty id form the global fit (key None)."""
    buckets: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "score", "side"]:
            raise InputError(f"{path}: expected header id,score,side")
        for r in reader:
            key = int(r["id"]) if r["id"].strip() else None
            side = r["side"].strip().lower()
            if side not in ("member", "nonmember"):
                raise InputError(f"{path}: side must be member or nonmember, got {side!r}")
            buckets.setdefault(key, {"member": [], "nonmember": []})[side].append(float(r["score"]))
    return {k: ShadowScores(v["member"], v["nonmember"]) for k, v in buckets.items()}


def write_shadow_scores(shadow: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score", "side"])
        for key, sc in shadow.items():
            label = "" if key is None else str(int(key))
            for v in sc.member_scores:
                w.writerow([label, _fmt(v), "member"])
            for v in sc.nonmember_scores:
                w.writerow([label, _fmt(v), "nonmember"])


def write_report_json(report: RocReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")


def read_report_json(path) -> RocReport:
    return RocReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_roc_csv(report: RocReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t, _ in report.curve:
            w.writerow([_fmt(f), _fmt(t)])
