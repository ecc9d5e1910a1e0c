"""Run configuration: a nested, strictly validated JSON document."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union, get_args, get_origin, get_type_hints

from .coupling import PairingPolicy, parse_dist
from .cvae.model import ModelConfig
from .generators import SubActionKind
from .refine import make_inpainter
from .render import CameraConfig
from .smooth import DRSettings


class ConfigError(ValueError):
    """Schema violation; ``path`` is the dotted location of the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class DataSection:
    kinds: List[str] = field(default_factory=lambda: ["arm_wave_left", "arm_raise", "leg_march", "leg_kick"])
    T: int = 16
    per_class: int = 10
    amplitude_spread: float = 0.2
    frequency_spread: float = 0.1
    phase_spread: float = 0.5
    jitter: float = 0.001
    fps: float = 20.0

    def validate(self):
        if not self.kinds:
            raise ConfigError("data.kinds", "must list at least one kind")
        for k, name in enumerate(self.kinds):
            try:
                SubActionKind.parse(name)
            except ValueError as exc:
                raise ConfigError(f"data.kinds[{k}]", str(exc)) from None
        if len(set(self.kinds)) != len(self.kinds):
            raise ConfigError("data.kinds", "duplicate kinds")
        if self.T < 2:
            raise ConfigError("data.T", "must be at least 2")
        if self.per_class < 1:
            raise ConfigError("data.per_class", "must be positive")
        for name in ("amplitude_spread", "frequency_spread", "phase_spread", "jitter"):
            if getattr(self, name) < 0:
                raise ConfigError(f"data.{name}", "must be non-negative")
        if self.fps <= 0:
            raise ConfigError("data.fps", "must be positive")


@dataclass
class CouplingSection:
    dist: str = "gaussian:0.1"
    count: int = 200
    # Allowed class pairs (indices into data.kinds); empty means all pairs.
    pairs: List[List[int]] = field(default_factory=list)

    def validate(self):
        try:
            parse_dist(self.dist)
        except ValueError as exc:
            raise ConfigError("coupling.dist", str(exc)) from None
        if self.count < 1:
            raise ConfigError("coupling.count", "must be positive")
        for k, pair in enumerate(self.pairs):
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ConfigError(f"coupling.pairs[{k}]", "must be two distinct class indices")


@dataclass
class RenderSection:
    height: int = 64
    width: int = 64
    scale: float = 32.0
    cx: float = 32.0
    cy: float = 30.0
    patch: int = 8
    thickness: float = 2.0
    rho: float = 1.0 / 3.0
    eps_pix: float = 1.0
    sigma: float = 1.0

    def validate(self):
        try:
            self.camera()
        except ValueError as exc:
            raise ConfigError("render", str(exc)) from None
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError("render.rho", "must lie in (0, 1]")
        if self.eps_pix <= 0:
            raise ConfigError("render.eps_pix", "must be positive")
        if self.sigma <= 0:
            raise ConfigError("render.sigma", "must be positive")

    def camera(self) -> CameraConfig:
        return CameraConfig(self.height, self.width, self.scale, self.cx, self.cy, self.patch, self.thickness)

    def dr_settings(self) -> DRSettings:
        return DRSettings(self.camera(), self.rho, self.eps_pix, self.sigma)


@dataclass
class RefineSection:
    inpainter: str = "mean_fill"
    stride: int = 4
    # Whether training adds the refinement term.
    enabled: bool = False

    def validate(self):
        try:
            make_inpainter(self.inpainter)
        except ValueError as exc:
            raise ConfigError("refine.inpainter", str(exc)) from None
        if self.stride < 1:
            raise ConfigError("refine.stride", "must be positive")


ARMS = ("full_class", "wo_gaussian", "wo_mask", "wo_dr", "w_dr")


@dataclass
class EvalSection:
    extractor: str = "handcrafted"
    n_pairs: int = 200
    bootstrap: int = 20
    test_per_pair: int = 24
    classifier_per_pair: int = 24
    samples_per_pair: int = 24
    classifier_epochs: int = 200
    arms: List[str] = field(default_factory=lambda: list(ARMS))

    def validate(self):
        if self.extractor not in ("handcrafted", "classifier"):
            raise ConfigError("eval.extractor", f"unknown extractor {self.extractor!r}")
        for name in ("n_pairs", "test_per_pair", "classifier_per_pair", "samples_per_pair", "classifier_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"eval.{name}", "must be positive")
        if self.test_per_pair < 2 or self.samples_per_pair < 2:
            raise ConfigError("eval", "need at least 2 samples per pair for covariance estimates")
        if self.bootstrap < 0:
            raise ConfigError("eval.bootstrap", "must be non-negative")
        for k, arm in enumerate(self.arms):
            if arm not in ARMS:
                raise ConfigError(f"eval.arms[{k}]", f"unknown arm {arm!r}; choose from {list(ARMS)}")


@dataclass
class RunConfig:
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    coupling: CouplingSection = field(default_factory=CouplingSection)
    render: RenderSection = field(default_factory=RenderSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    refine: RefineSection = field(default_factory=RefineSection)
    eval: EvalSection = field(default_factory=EvalSection)
    output_dir: str = "runs"

    def validate(self) -> "RunConfig":
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        for section in (self.data, self.coupling, self.render, self.refine, self.eval):
            section.validate()
        n = len(self.data.kinds)
        for k, pair in enumerate(self.coupling.pairs):
            if not all(0 <= c < n for c in pair):
                raise ConfigError(f"coupling.pairs[{k}]", f"class index out of range for {n} kinds")
        if self.model.num_classes != n:
            raise ConfigError("model.num_classes", f"is {self.model.num_classes} but data.kinds lists {n}")
        if self.model.num_frames != self.data.T:
            raise ConfigError("model.num_frames", f"is {self.model.num_frames} but data.T is {self.data.T}")
        if n < 2:
            raise ConfigError("data.kinds", "coupling needs at least two kinds")
        return self

    # -- derived objects -----------------------------------------------------------

    def kinds(self) -> List[SubActionKind]:
        return [SubActionKind.parse(k) for k in self.data.kinds]

    def policy(self) -> PairingPolicy:
        if not self.coupling.pairs:
            return PairingPolicy(full_class=True)
        return PairingPolicy.allow(self.coupling.pairs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: Any) -> "RunConfig":
        cfg = _build(cls, d, "")
        return cfg.validate()

    @classmethod
    def load(cls, path: Union[str, Path], overrides: Sequence[str] = ()) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(apply_overrides(raw, overrides))


def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _convert(tp, value, path: str):
    origin = get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        (inner,) = get_args(tp)
        return [_convert(inner, v, f"{path}[{k}]") for k, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported field type {_type_name(tp)}")


def _build(cls, d, path: str):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected an object, got {type(d).__name__}")
    hints = get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    for key in d:
        if key not in names:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")
    kwargs = {}
    for name in names:
        if name in d:
            kwargs[name] = _convert(hints[name], d[name], f"{path}.{name}" if path else name)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key.sub=value`` overrides; values parse as JSON, else as strings."""
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigError("", f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for k, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(".".join(parts[: k + 1]), "cannot override inside a non-object")
            node = child
        node[parts[-1]] = value
    return out
