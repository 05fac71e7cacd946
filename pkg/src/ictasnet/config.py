"""Model/training configuration records, named presets and the YAML config file."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

VARIANTS = ("SC", "MC", "TwoD", "ThreeD", "IC", "ICDownsized", "ICUpsized")
ONE_D_VARIANTS = ("SC", "MC", "TwoD")
IC_FAMILY = ("IC", "ICDownsized", "ICUpsized")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one network; defaults are the best IC model (F=512, N=128, C=64).

    ``H`` left as ``None`` resolves to 4*C for the channel-split variants and
    4*N for the 1-D variants.
    """

    variant: str = "IC"
    D: int = 8
    S: int = 3
    F: int = 512
    N: int = 128
    C: int = 64
    H: int | None = None
    K: int = 256
    M: int = 6
    reference_channel: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.H is None:
            width = self.N if self.variant in ONE_D_VARIANTS else self.C
            object.__setattr__(self, "H", 4 * width)
        for name in ("D", "S", "F", "N", "C", "H", "K", "M"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.K % 2:
            raise ConfigError(f"window length K must be even for 50% overlap, got {self.K}")
        if not 1 <= self.reference_channel <= self.M:
            raise ConfigError(f"reference_channel {self.reference_channel} outside [1, {self.M}]")
        if self.variant == "SC" and self.M != 1:
            raise ConfigError(f"SC variant is single-channel, got M={self.M}")
        if self.variant in ("ICDownsized", "ICUpsized"):
            if self.C % (2 ** (self.S - 1)):
                raise ConfigError(f"C={self.C} cannot be halved across {self.S} stacks")
            if self.H % self.C:
                raise ConfigError(f"H={self.H} must be a multiple of C={self.C} for scheduled stacks")

    @property
    def hop(self) -> int:
        return self.K // 2

    @property
    def reference_index(self) -> int:
        return self.reference_channel - 1

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 100
    batch: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.steps < 0 or self.batch < 1:
            raise ConfigError("steps must be >= 0 and batch >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_ONE_D_BASE = dict(D=8, S=3, F=2048, M=6, K=256, reference_channel=5)
_IC_BASE = dict(variant="IC", D=8, S=3, F=2048, N=64, C=8, H=32, M=6, K=256, reference_channel=5)

PRESETS: dict[str, ModelConfig] = {
    "mc": ModelConfig(variant="MC", N=512, C=1, H=2048, **_ONE_D_BASE),
    "2d": ModelConfig(variant="TwoD", N=512, C=1, H=2048, **_ONE_D_BASE),
    "3d": ModelConfig(variant="ThreeD", N=64, C=8, H=32, **_ONE_D_BASE),
    "ic": ModelConfig(**_IC_BASE),
    "ic-best": ModelConfig(**{**_IC_BASE, "F": 512, "N": 128, "C": 64, "H": 256}),
    "model1": ModelConfig(**{**_IC_BASE, "S": 2}),
    "model2": ModelConfig(**_IC_BASE),
    "model3": ModelConfig(**{**_IC_BASE, "S": 4}),
    "model4": ModelConfig(**{**_IC_BASE, "D": 6}),
    "model5": ModelConfig(**{**_IC_BASE, "D": 10}),
    "model6": ModelConfig(**{**_IC_BASE, "F": 512}),
    "model7": ModelConfig(**{**_IC_BASE, "F": 512, "N": 128}),
    "model8": ModelConfig(**{**_IC_BASE, "F": 1024, "N": 128}),
    "model9": ModelConfig(**{**_IC_BASE, "F": 512, "N": 128, "C": 32, "H": 128}),
    "model10": ModelConfig(**{**_IC_BASE, "F": 512, "N": 128, "C": 64, "H": 256}),
    "modelD": ModelConfig(**{**_IC_BASE, "variant": "ICDownsized", "F": 512, "N": 128, "C": 64, "H": 256}),
    "modelU": ModelConfig(**{**_IC_BASE, "variant": "ICUpsized", "F": 512, "N": 128, "C": 64, "H": 256}),
    "modelS": ModelConfig(**{**_IC_BASE, "F": 512, "N": 64, "C": 16, "H": 64}),
    # Desk-scale two-microphone IC network used for overfitting/determinism runs.
    "toy": ModelConfig(variant="IC", D=4, S=2, F=64, N=32, C=8, H=32, K=64, M=2, reference_channel=1),
}

# Published parameter totals in millions, keyed by preset.
PUBLISHED_PARAM_MILLIONS: dict[str, float] = {
    "mc": 79.1, "2d": 84.4, "3d": 2.56, "ic": 1.35, "ic-best": 1.67,
    "model1": 1.34, "model2": 1.35, "model3": 1.36, "model4": 1.34, "model5": 1.35,
    "model6": 0.360, "model7": 0.425, "model8": 0.820, "model9": 0.738, "model10": 1.67,
    "modelD": 1.01, "modelU": 0.954, "modelS": 0.427,
}


def get_preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


@dataclass
class ConfigFile:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.model.to_dict(), "train": self.train.to_dict()}

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, doc: Any, base: ModelConfig | None = None) -> "ConfigFile":
        doc = {} if doc is None else doc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping with 'model' and/or 'train' sections")
        unknown = set(doc) - {"model", "train"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        model = _build(ModelConfig, doc.get("model"), base or ModelConfig())
        train = _build(TrainConfig, doc.get("train"), TrainConfig())
        return cls(model=model, train=train)

    @classmethod
    def loads(cls, text: str, base: ModelConfig | None = None) -> "ConfigFile":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        return cls.from_dict(doc, base)

    @classmethod
    def load(cls, path: str | Path, base: ModelConfig | None = None) -> "ConfigFile":
        return cls.loads(Path(path).read_text(), base)


def _build(kind, section, base):
    if section is None:
        return base
    if not isinstance(section, dict):
        raise ConfigError(f"section for {kind.__name__} must be a mapping")
    allowed = {f.name for f in fields(kind)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {kind.__name__} key(s): {', '.join(sorted(unknown))}")
    values = base.to_dict()
    if kind is ModelConfig and "H" not in section and ({"variant", "N", "C"} & set(section)):
        # H was derived from the base dims; let it re-derive for the new ones.
        values["H"] = None
    values.update(section)
    if kind is TrainConfig:
        for key in ("learning_rate", "beta1", "beta2", "eps"):
            values[key] = float(values[key])
    return kind(**values)
