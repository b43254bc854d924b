"""Pipeline configuration and its INI-file representation.

Example file::

    [pipeline]
    size = 64x48
    J = 5
    p = 6
    m = 2
    texture = yes
    grid = 3x4
    levels = 8
    offset = 1,0
    n_components = 80
    epsilon = 0.99
    standardize = no
    seed = 0
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .corpus import check_target
from .scattering import ScatteringConfig

SECTION = "pipeline"


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the extraction, reduction and matching pipeline.

    ``size`` is (width, height) and ``grid`` is (rows, cols) of texture
    blocks. When ``n_components`` is None the PCA dimension is the smallest
    one retaining ``epsilon`` of the spectrum.
    """

    size: tuple[int, int] = (64, 48)
    J: int = 5
    p: int = 6
    m: int = 2
    texture: bool = True
    grid: tuple[int, int] = (3, 4)
    levels: int = 8
    offset: tuple[int, int] = (1, 0)
    n_components: int | None = 80
    epsilon: float = 0.99
    standardize: bool = False
    convert_color: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "size", tuple(int(v) for v in self.size))
        object.__setattr__(self, "grid", tuple(int(v) for v in self.grid))
        object.__setattr__(self, "offset", tuple(int(v) for v in self.offset))
        self.scattering  # validates J, p, m
        check_target(self.size, self.grid if self.texture else (1, 1), self.J)
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.n_components is not None and self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")

    @property
    def scattering(self) -> ScatteringConfig:
        return ScatteringConfig(self.J, self.p, self.m)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("size", "grid", "offset"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **changes) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _pair(text: str) -> tuple[int, int]:
    parts = text.replace("x", ",").replace("X", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"expected a pair like 64x48 or 1,0, got {text!r}")
    return int(parts[0]), int(parts[1])


def load_config(path) -> PipelineConfig:
    """Read a PipelineConfig from the ``[pipeline]`` section of an INI file."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep 'J' distinct from 'j'
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section(SECTION):
        raise ValueError(f"{path}: missing [{SECTION}] section")
    sec = parser[SECTION]
    defaults = PipelineConfig()
    values = {}
    for f in fields(PipelineConfig):
        if f.name not in sec:
            continue
        raw = sec[f.name].strip()
        current = getattr(defaults, f.name)
        if f.name in ("size", "grid", "offset"):
            values[f.name] = _pair(raw)
        elif isinstance(current, bool):
            values[f.name] = sec.getboolean(f.name)
        elif f.name == "n_components":
            values[f.name] = None if raw.lower() in ("", "none", "auto") else int(raw)
        elif isinstance(current, float):
            values[f.name] = float(raw)
        else:
            values[f.name] = int(raw)
    unknown = set(sec) - {f.name for f in fields(PipelineConfig)}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return PipelineConfig(**values)


def dump_config(config: PipelineConfig, path) -> None:
    lines = [f"[{SECTION}]"]
    for key, value in config.to_dict().items():
        if key in ("size", "grid"):
            value = f"{value[0]}x{value[1]}"
        elif key == "offset":
            value = f"{value[0]},{value[1]}"
        elif isinstance(value, bool):
            value = "yes" if value else "no"
        elif value is None:
            value = "auto"
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
