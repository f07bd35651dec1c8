"""Run configuration: JSON file < command-line flags, with strict field checking."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

from choiceleak.data import Surface
from choiceleak.errors import InputError
from choiceleak.selectors import SelectorSpec

ATTACK_MODES = ("side", "black", "loss", "lira")


@dataclass
class DatasetConfig:
    path: Optional[str] = None
    groundtruth: Optional[str] = None
    shadow: Optional[str] = None
    n_pool: int = 2000
    n_outside: int = 1000
    dim: int = 8
    shift: float = 0.0
    spread: float = 3.0


@dataclass
class WindowConfig:
    size: int = 800
    interval: int = 40
    shuffle_seed: Optional[int] = None
    pad_to_multiple: bool = False


@dataclass
class AttackConfig:
    mode: str = "side"
    kappa: Optional[float] = None
    k_clusters: int = 5
    kmeans_seed: Optional[int] = None
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4


@dataclass
class RunConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    selector: dict = field(default_factory=lambda: {"kind": "top_score", "seed": 0, "invert": False})
    ratio: float = 0.2
    window: WindowConfig = field(default_factory=WindowConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    surfaces: list = field(default_factory=lambda: ["tm", "sp"])
    fpr_levels: list = field(default_factory=lambda: [0.05])
    output_dir: str = "run"

    @property
    def selector_spec(self) -> SelectorSpec:
        return SelectorSpec.from_dict(self.selector)

    @property
    def shuffle_seed(self) -> int:
        s = self.window.shuffle_seed
        return self.seed if s is None else s

    @property
    def kmeans_seed(self) -> int:
        s = self.attack.kmeans_seed
        return self.seed if s is None else s

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved(self) -> dict:
        """Every parameter any stage consumes, with derived seeds filled in."""
        d = self.to_dict()
        d["selector"] = self.selector_spec.to_dict()
        d["window"]["shuffle_seed"] = self.shuffle_seed
        d["attack"]["kmeans_seed"] = self.kmeans_seed
        return d

    def validate(self) -> "RunConfig":
        def need(cond, where, msg):
            if not cond:
                raise InputError(f"config.{where}: {msg}")

        need(isinstance(self.seed, int), "seed", "must be an integer")
        need(0 < self.ratio <= 1, "ratio", f"must lie in (0, 1], got {self.ratio}")
        try:
            self.selector_spec
        except InputError as exc:
            raise InputError(f"config.selector: {exc}") from None
        ds = self.dataset
        if ds.path is None:
            need(ds.n_pool >= 2, "dataset.n_pool", "must be >= 2")
            need(ds.n_outside >= 0, "dataset.n_outside", "must be >= 0")
            need(ds.dim >= 1, "dataset.dim", "must be >= 1")
            need(ds.shift >= 0, "dataset.shift", "must be >= 0")
        else:
            need(Path(ds.path).exists(), "dataset.path", f"file not found: {ds.path}")
        for attr in ("groundtruth", "shadow"):
            p = getattr(ds, attr)
            if p is not None:
                need(Path(p).exists(), f"dataset.{attr}", f"file not found: {p}")
        need(self.window.size >= 1, "window.size", "must be >= 1")
        need(self.window.interval >= 1, "window.interval", "must be >= 1")
        need(
            self.window.size % self.window.interval == 0,
            "window.interval",
            f"{self.window.interval} must divide window.size {self.window.size}",
        )
        need(self.attack.mode in ATTACK_MODES, "attack.mode", f"must be one of {ATTACK_MODES}")
        need(self.attack.kappa is None or self.attack.kappa > 0, "attack.kappa", "must be > 0")
        need(self.attack.k_clusters >= 1, "attack.k_clusters", "must be >= 1")
        need(self.attack.kmeans_max_iter >= 1, "attack.kmeans_max_iter", "must be >= 1")
        need(self.attack.kmeans_tol >= 0, "attack.kmeans_tol", "must be >= 0")
        need(len(self.surfaces) > 0, "surfaces", "must name at least one surface")
        for s in self.surfaces:
            try:
                Surface.parse(s)
            except InputError as exc:
                raise InputError(f"config.surfaces: {exc}") from None
        for lv in self.fpr_levels:
            need(0 < lv < 1, "fpr_levels", f"levels must lie in (0, 1), got {lv}")
        return self


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise InputError(f"config{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise InputError(f"config{where}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply dotted-key overrides, e.g. ``{"window.interval": 20}``."""
    d = copy.deepcopy(cfg.to_dict())
    for key, value in overrides.items():
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return config_from_dict(d)
