"""Experiment configuration, transform presets and provenance records."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from .echo import PROFILES, EchoScene, Material, named_profile
from .evaluation import ProtocolConfig
from .scattering import ScatteringConfig

TRANSFORM_KINDS = ("avft", "st")


@dataclass(frozen=True)
class TransformConfig:
    name: str
    kind: str = "st"
    qualities: tuple = (1, 1, 1)
    scales: tuple | None = None        # per-layer J; None picks log2(N) - 2
    subsample: tuple | None = None     # per-layer r; None means no subsampling
    output_stride: int | None = None
    log: bool = False                  # avft only

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"transform kind must be one of {TRANSFORM_KINDS}, got {self.kind!r}")
        for key in ("qualities", "scales", "subsample"):
            v = getattr(self, key)
            if v is not None:
                object.__setattr__(self, key, tuple(v))

    def scattering(self, signal_length: int) -> ScatteringConfig:
        if self.kind != "st":
            raise ValueError(f"{self.name} is not a scattering transform")
        return ScatteringConfig.from_qualities(signal_length, self.qualities, self.scales,
                                               self.subsample, output_stride=self.output_stride)

    def validate(self, signal_length: int | None = None) -> None:
        """Check the layer parameters; with a length, also check they fit it.

        Without one, a long power-of-two stands in, so only structural errors
        (bad Q, J, non power-of-two rates or strides) are caught.
        """
        if self.kind == "st":
            self.scattering(signal_length or 1 << 24)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TransformConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown transform fields: {sorted(unknown)}")
        return cls(**d)


# Experiment presets are sized for 8192-sample records. The coarse one uses
# the plain defaults; the fine one subsamples after each modulus and averages
# each path down to a single value at depths 2 and 3, which keeps the feature
# count near 12k.
EXPERIMENT_PRESETS = {
    "avft": TransformConfig("avft", kind="avft"),
    "coarse": TransformConfig("coarse", qualities=(1, 1, 1)),
    "fine": TransformConfig("fine", qualities=(8, 4, 4), scales=(10, 7, 4),
                            subsample=(8, 4, 1), output_stride=256),
    "real": TransformConfig("real", qualities=(8, 1), scales=(10, 7), subsample=(8, 1)),
}

# Quality patterns with every other parameter left at its default.
DEFAULT_QUALITIES = {"coarse": (1, 1, 1), "fine": (8, 4, 4), "real": (8, 1)}


def default_scattering(name: str, signal_length: int) -> ScatteringConfig:
    return ScatteringConfig.from_qualities(signal_length, DEFAULT_QUALITIES[name])


def preset(name: str) -> TransformConfig:
    try:
        return EXPERIMENT_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(EXPERIMENT_PRESETS)}") from None


@dataclass(frozen=True)
class GroupConfig:
    """One labelled class: an object observed from every rail position and rotation."""
    label: str
    profile: str = "triangle"
    inside_speed: float = 2000.0
    inside_density: float = 1500.0
    outside_speed: float = 1503.0
    outside_density: float = 1000.0

    def __post_init__(self):
        if self.profile.replace("-", "_") not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if min(self.inside_speed, self.inside_density, self.outside_speed, self.outside_density) <= 0:
            raise ValueError(f"group {self.label}: speeds and densities must be positive")

    def scene(self, cfg: "ExperimentConfig", rotation: float) -> EchoScene:
        return EchoScene(
            inside=Material(self.inside_speed, self.inside_density),
            outside=Material(self.outside_speed, self.outside_density),
            diameter_profile=named_profile(self.profile),
            range_x=cfg.range_x,
            rail_half_length_y=cfg.rail_half_length_y,
            rotation_theta=rotation,
            num_positions=cfg.num_positions,
            num_echoes=cfg.num_echoes,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    groups: tuple                                  # exactly two GroupConfig
    rotations: tuple = (0.0, math.pi / 12, math.pi / 6)
    record_length: int = 8192
    sample_rate: float = 50_000.0
    pulse_frequency: float = 2500.0
    snr_db: float = 5.0
    seed: int = 0
    range_x: float = 10.0
    rail_half_length_y: float = 6.0
    num_positions: int = 64
    num_echoes: int = 5
    normalize: bool = True
    transforms: tuple = (EXPERIMENT_PRESETS["avft"], EXPERIMENT_PRESETS["coarse"], EXPERIMENT_PRESETS["fine"])
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "rotations", tuple(float(r) for r in self.rotations))
        object.__setattr__(self, "transforms", tuple(self.transforms))
        object.__setattr__(self, "snr_db", float(self.snr_db))    # accepts "inf" from JSON
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number or inf")
        if len(self.groups) != 2:
            raise ValueError(f"a binary task needs exactly two groups, got {len(self.groups)}")
        if self.groups[0].label == self.groups[1].label:
            raise ValueError("group labels must differ")
        if not self.rotations:
            raise ValueError("need at least one rotation")
        n = self.record_length
        if n < 2 or n & (n - 1):
            raise ValueError(f"record_length must be a power of two, got {n}")
        if self.sample_rate <= 2 * self.pulse_frequency:
            raise ValueError("sample_rate must exceed twice the pulse frequency")
        names = [t.name for t in self.transforms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate transform names: {names}")
        # record-length fit is checked when features are computed
        for t in self.transforms:
            t.validate()

    def transform(self, name: str) -> TransformConfig:
        for t in self.transforms:
            if t.name == name:
                return t
        raise ValueError(f"no transform named {name!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = [asdict(g) for g in self.groups]
        d["transforms"] = [t.to_dict() for t in self.transforms]
        d["protocol"] = self.protocol.to_dict()
        if math.isinf(self.snr_db):
            d["snr_db"] = str(self.snr_db)        # strict JSON has no infinity
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d["groups"] = tuple(GroupConfig(**g) for g in d["groups"])
        if "transforms" in d:
            d["transforms"] = tuple(
                preset(t) if isinstance(t, str) else TransformConfig.from_dict(t) for t in d["transforms"])
        if "protocol" in d:
            d["protocol"] = ProtocolConfig(**d["protocol"])
        return cls(**d)


def material_task(**kw) -> ExperimentConfig:
    groups = (GroupConfig("c2000", inside_speed=2000.0), GroupConfig("c2500", inside_speed=2500.0))
    return ExperimentConfig("material", groups, **kw)


def shape_task(**kw) -> ExperimentConfig:
    groups = (GroupConfig("triangle"), GroupConfig("shark_fin", profile="shark_fin"))
    return ExperimentConfig("shape", groups, **kw)


TASKS = {"material": material_task, "shape": shape_task}


# -- provenance -----------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def provenance(config: dict, seeds=None) -> dict:
    """Hash of the config plus library versions; no timestamps, so reruns match."""
    import numba

    from . import __version__

    return {
        "config_sha256": config_hash(config),
        "seeds": [] if seeds is None else list(seeds),
        "versions": {
            "sonarscat": __version__,
            "numpy": np.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
    }
