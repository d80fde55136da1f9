"""Run configuration files (TOML or JSON).

Layout::

    seed = 0
    projections = 10
    out = "out"
    factual_size = 100

    [data]
    synthetic = { n = 1000, d = 2, sep = 12.0 }   # or: path = "data.csv", label = "y"

    [model]
    kind = "logistic"          # or: path = "model.json" / command = "python serve.py"
    epochs = 30

    [target]
    kind = "constant"          # constant(value) | file(path) | beta(a, b), optional size
    value = 1.0

    [discount]
    U_x = 2.0
    U_y = 0.5

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .confidence import UclConfig
from .errors import ConfigError, InvalidArgumentError
from .optimizer import DiscountConfig, IntervalSchedule, parse_eta_schedule

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["DataSpec", "ModelConfig", "TargetSpec", "RunConfig", "load_config", "parse_config"]

BOX_MODES = ("factual", "data")


@dataclass(frozen=True)
class DataSpec:
    path: str | None = None
    label: str = "label"
    schema: dict[str, str] = field(default_factory=dict)
    synthetic: dict[str, float] | None = None
    ratio: float = 0.8

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ConfigError("[data] needs exactly one of 'path' or 'synthetic'")
        if self.synthetic is not None:
            unknown = set(self.synthetic) - {"n", "d", "sep"}
            if unknown:
                raise ConfigError(f"[data.synthetic] unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class ModelConfig:
    kind: str | None = "logistic"
    path: str | None = None
    command: str | list[str] | None = None
    timeout: float = 30.0
    epochs: int = 500
    lr: float = 0.5
    hidden: tuple[int, ...] = (16,)
    n_centers: int = 10
    activation: str = "tanh"

    def __post_init__(self):
        sources = [self.path is not None, self.command is not None]
        if sum(sources) > 1:
            raise ConfigError("[model] takes at most one of 'path' or 'command'")
        if not any(sources) and self.kind not in ("logistic", "mlp", "rbf"):
            raise ConfigError(f"[model] unknown kind {self.kind!r}")


@dataclass(frozen=True)
class TargetSpec:
    kind: str = "constant"
    value: float = 1.0
    path: str | None = None
    a: float = 1.0
    b: float = 1.0
    size: int | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "file", "beta"):
            raise ConfigError(f"[target] unknown kind {self.kind!r}")
        if self.kind == "file" and self.path is None:
            raise ConfigError("[target] kind 'file' needs 'path'")
        if self.kind == "beta" and (self.a <= 0 or self.b <= 0):
            raise ConfigError("[target] beta parameters must be positive")
        if self.size is not None and self.size < 1:
            raise ConfigError("[target] size must be positive")

    def build(self, n: int, seed: int, base: Path | None = None) -> np.ndarray:
        size = self.size or n
        if self.kind == "constant":
            return np.full(size, float(self.value))
        if self.kind == "beta":
            return np.random.default_rng(seed).beta(self.a, self.b, size)
        path = Path(self.path)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            values = np.loadtxt(path, delimiter=",", ndmin=1, dtype=float)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read target sample {path}: {exc}") from None
        return values.reshape(-1)


@dataclass(frozen=True)
class RunConfig:
    data: DataSpec
    discount: DiscountConfig
    model: ModelConfig = field(default_factory=ModelConfig)
    target: TargetSpec = field(default_factory=TargetSpec)
    projections: int = 10
    seed: int = 0
    out: str = "out"
    factual_size: int = 100
    box: str = "factual"
    threshold: float = 0.5
    base_dir: str = "."

    def __post_init__(self):
        if self.projections < 1:
            raise ConfigError("projections must be at least 1")
        if self.factual_size < 1:
            raise ConfigError("factual_size must be at least 1")
        if self.box not in BOX_MODES:
            raise ConfigError(f"box must be one of {BOX_MODES}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def with_overrides(self, **kw) -> "RunConfig":
        """Apply command-line overrides; ``None`` means not given."""
        dkw = {}
        for key, name in (("alpha", "alpha"), ("ux", "U_x"), ("uy", "U_y"), ("tau", "tau"),
                          ("max_iters", "max_iters")):
            if kw.get(key) is not None:
                dkw[name] = kw[key]
        if kw.get("eta_schedule") is not None:
            sched = kw["eta_schedule"]
            dkw["eta_schedule"] = parse_eta_schedule(sched) if isinstance(sched, str) else sched
        top = {}
        if kw.get("seed") is not None:
            top["seed"] = kw["seed"]
            dkw["seed"] = kw["seed"]
        if kw.get("projections") is not None:
            top["projections"] = kw["projections"]
        if kw.get("out") is not None:
            top["out"] = kw["out"]
        try:
            discount = replace(self.discount, **dkw)
            return replace(self, discount=discount, **top)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    def echo(self) -> dict[str, Any]:
        """JSON-ready view of the effective configuration."""
        d = self.discount
        disc = {
            "U_x": d.U_x, "U_y": d.U_y, "alpha": d.alpha, "tau": d.tau, "epsilon": d.epsilon,
            "max_iters": d.max_iters, "init_noise_std": d.init_noise_std,
            "eta_schedule": d.eta_schedule.describe(), "seed": d.seed,
            "delta": d.ucl.delta, "grid_size": d.ucl.grid_size,
            "squared_integrand": d.ucl.squared_integrand,
        }
        return {
            "data": _plain(asdict(self.data)),
            "model": _plain(asdict(self.model)),
            "target": _plain(asdict(self.target)),
            "discount": disc,
            "projections": self.projections,
            "seed": self.seed,
            "factual_size": self.factual_size,
            "box": self.box,
            "threshold": self.threshold,
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def _build(cls, values: dict, name: str):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"[{name}] unknown keys {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, InvalidArgumentError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


_TOP_KEYS = {"data", "model", "target", "discount", "projections", "seed", "out", "factual_size"}
_DISCOUNT_KEYS = {"U_x", "U_y", "alpha", "tau", "epsilon", "max_iters", "init_noise_std",
                  "eta_schedule", "box", "delta", "grid_size", "squared_integrand", "threshold"}


def parse_config(doc: dict, base_dir: str | Path = ".") -> RunConfig:
    """Validate a decoded config document."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a table at top level")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")

    data = _build(DataSpec, _section(doc, "data"), "data")
    model_sec = _section(doc, "model")
    if "hidden" in model_sec:
        model_sec["hidden"] = tuple(model_sec["hidden"])
    model = _build(ModelConfig, model_sec, "model")
    target = _build(TargetSpec, _section(doc, "target"), "target")

    disc = _section(doc, "discount")
    unknown = set(disc) - _DISCOUNT_KEYS
    if unknown:
        raise ConfigError(f"[discount] unknown keys {sorted(unknown)}")
    for key in ("U_x", "U_y"):
        if key not in disc:
            raise ConfigError(f"[discount] missing required key {key!r}")
    box = disc.pop("box", "factual")
    threshold = disc.pop("threshold", 0.5)
    ucl_kw = {k: disc.pop(k) for k in ("delta", "grid_size", "squared_integrand") if k in disc}
    sched = disc.pop("eta_schedule", None)
    try:
        disc["eta_schedule"] = parse_eta_schedule(sched) if sched is not None else IntervalSchedule()
        discount = DiscountConfig(ucl=UclConfig(**ucl_kw), seed=seed, **disc)
    except (TypeError, InvalidArgumentError) as exc:
        raise ConfigError(f"[discount] {exc}") from None

    return RunConfig(
        data=data, discount=discount, model=model, target=target,
        projections=doc.get("projections", 10), seed=seed, out=doc.get("out", "out"),
        factual_size=doc.get("factual_size", 100), box=box, threshold=threshold,
        base_dir=str(base_dir),
    )


def load_config(path) -> RunConfig:
    """Read a ``.toml`` or ``.json`` file (anything else is tried as TOML)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return parse_config(doc, path.parent)
