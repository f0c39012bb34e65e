"""Experiment configuration: JSON file, schema-checked, unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .clifford import MAX_GENERATORS, SignatureSplit
from .exceptions import ConfigError
from .lattice import FrameField, TorusLattice

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1, "maximum": MAX_GENERATORS},
        "n1": {"type": "integer", "minimum": 0},
        "N_list": {
            "type": "array",
            "items": {"type": "integer", "minimum": 4, "multipleOf": 2},
            "minItems": 1,
        },
        "alpha": {"type": "number"},
        "dep_axis": {"type": "integer", "minimum": 1},
        "rot_plane": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
            ]
        },
        "seed": {"type": "integer", "minimum": 0},
        "lambda0": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
        "grid_count": {"type": "integer", "minimum": 4},
        "mu": {"oneOf": [{"type": "null"}, {"type": "number", "not": {"const": 0}}]},
        "output_dir": {"type": "string", "minLength": 1},
        "emit_matrices": {"type": "boolean"},
    },
}


# message fragment -> config key, first match wins
_ERROR_KEYS = (
    ("plane", "rot_plane"),
    ("dep_axis", "dep_axis"),
    ("N must", "N_list"),
    ("space dimension", "n"),
    ("n1", "n1"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a run.  ``mu`` is the imaginary part of the fixed spectral parameter."""

    n: int = 2
    n1: int = 1
    N_list: tuple = (8, 16, 32)
    alpha: float = 1.0
    dep_axis: int = 2
    rot_plane: tuple | None = (1, 2)
    seed: int = 42
    lambda0: str | float = "auto"
    grid_count: int = 11
    mu: float | None = None
    output_dir: str = "weaklab-out"
    emit_matrices: bool = False
    source: str = field(default="<defaults>", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "N_list", tuple(self.N_list))
        if self.rot_plane is not None:
            object.__setattr__(self, "rot_plane", tuple(self.rot_plane))
        if list(self.N_list) != sorted(set(self.N_list)):
            raise ConfigError("N_list must be strictly ascending", key="N_list")
        try:
            self.frame()
            for N in self.N_list:
                TorusLattice(self.n, N)
        except ConfigError:
            raise
        except ValueError as exc:
            msg = str(exc)
            key = next((k for marker, k in _ERROR_KEYS if marker in msg), None)
            raise ConfigError(f"{self.source}: {msg}", key=key) from exc

    @property
    def split(self) -> SignatureSplit:
        try:
            return SignatureSplit.of(self.n, self.n1)
        except ValueError as exc:
            raise ConfigError(str(exc), key="n1") from exc

    def frame(self) -> FrameField:
        return FrameField(self.split, self.rot_plane, self.dep_axis, float(self.alpha))

    def lattices(self):
        return [TorusLattice(self.n, N) for N in self.N_list]

    @property
    def mu_value(self) -> complex | None:
        return None if self.mu is None else 1j * float(self.mu)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        d["N_list"] = list(self.N_list)
        d["rot_plane"] = None if self.rot_plane is None else list(self.rot_plane)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return from_dict(d, self.source)


def from_dict(data: dict, source: str = "<dict>") -> ExperimentConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        key = exc.absolute_path[0] if exc.absolute_path else None
        if key is None and exc.validator == "additionalProperties":
            extra = sorted(set(data) - set(SCHEMA["properties"]))
            key = extra[0] if extra else None
        raise ConfigError(f"{source}: {exc.message}", key=key) from exc
    return ExperimentConfig(**data, source=source)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key=None) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})", key=None) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object", key=None)
    return from_dict(data, str(path))


DEMO = ExperimentConfig()
