"""Experiment configuration: JSON on disk, validated with pydantic."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .grid import PRESETS


class ConfigError(Exception):
    """Invalid configuration; ``violations`` lists every problem found."""

    exit_code = 2

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigFileMissing(ConfigError):
    exit_code = 4


class ConfigMalformed(ConfigError):
    exit_code = 5


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridBlock(_Block):
    d: Literal[2, 3] = 3
    N: int = Field(32, ge=4)
    L: float = Field(2 * math.pi, gt=0)

    @field_validator("N")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("N must be even")
        return v


class SolverBlock(_Block):
    alpha: float = 1.0
    T: float = Field(1.0, gt=0)
    N_t: int = Field(11, ge=2)
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(50, ge=1)
    dealias: bool = True
    nu: float = Field(1.0, gt=0)

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if not 0.5 < v <= 1:
            raise ValueError("alpha out of (0.5, 1]")
        return v


class ExponentSpec(_Block):
    kind: Literal["constant", "sinusoidal", "log_tail", "table"] = "constant"
    p0: float | None = None
    a: float | None = None
    p_inf: float | None = None
    b: float | None = None
    values: list[float] | None = None
    path: str | None = None

    @model_validator(mode="after")
    def _params(self):
        need = {"constant": ["p0"], "sinusoidal": ["p0", "a"], "log_tail": ["p_inf", "b"], "table": []}[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.kind} exponent needs {', '.join(missing)}")
        if self.kind == "table" and (self.values is None) == (self.path is None):
            raise ValueError("table exponent needs exactly one of values or path")
        return self

    def as_dict(self) -> dict:
        return self.model_dump(exclude_none=True)


class ExponentBlock(_Block):
    time: ExponentSpec = ExponentSpec(kind="sinusoidal", p0=5.0, a=0.5)
    space: ExponentSpec = ExponentSpec(kind="constant", p0=4.0)
    q: float = Field(6.0, gt=1)
    frak: float | None = Field(None, gt=1)


class ForcingBlock(_Block):
    kind: Literal["zero", "analytic", "tensor"] = "zero"
    preset: str = "random_divfree"
    amplitude: float = 1.0
    seed: int = Field(0, ge=0)
    decay: float = Field(0.0, ge=0)
    k_peak: float | None = Field(None, gt=0)

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}")
        return v


class DataBlock(_Block):
    preset: str = "abc_beltrami_3d"
    amplitude: float = 1.0
    seed: int = Field(0, ge=0, lt=2**64)
    k_peak: float | None = Field(None, gt=0)
    input: str | None = None
    forcing: ForcingBlock = ForcingBlock()

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}")
        return v


class RunBlock(_Block):
    out_dir: str = "fracns_out"
    format: Literal["csv", "json"] = "csv"
    field_path: str | None = None
    trajectory_dir: str | None = None
    kernel: Literal["heat", "grad_heat", "oseen"] = "heat"
    times: list[float] = [0.01, 0.1, 1.0, 10.0]
    radii: list[float] = [0.1, 0.5, 1.0, 2.0, 5.0]
    core_factor: float = Field(16.0, gt=1)
    sweep_T: list[float] = [0.25, 0.5, 1.0, 2.0, 4.0]
    seeds: int = Field(10, ge=1)
    beta: float = Field(1.0, gt=0)
    substeps: int = Field(4, ge=1)
    cb_trials: int = Field(8, ge=1)

    @field_validator("times", "sweep_T", "radii")
    @classmethod
    def _positive(cls, v):
        if not v or any(x <= 0 for x in v):
            raise ValueError("must be a nonempty list of positive numbers")
        return v


class ExperimentConfig(_Block):
    grid: GridBlock = GridBlock()
    solver: SolverBlock = SolverBlock()
    exponents: ExponentBlock = ExponentBlock()
    data: DataBlock = DataBlock()
    run: RunBlock = RunBlock()

    @model_validator(mode="after")
    def _cross(self):
        if self.data.preset.endswith("_2d") and self.grid.d != 2:
            raise ValueError(f"preset {self.data.preset} needs grid.d = 2")
        if self.data.preset.endswith("_3d") and self.grid.d != 3:
            raise ValueError(f"preset {self.data.preset} needs grid.d = 3")
        return self

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        if e["type"] == "extra_forbidden":
            msg = f"unknown key {e['loc'][-1]!r}"
        out.append(f"{loc}: {msg}")
    return out


def validate_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON object, collecting every violation."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a UTF-8 JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigFileMissing([f"config file not found: {path}"]) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigFileMissing([f"cannot read config {path}: {exc}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigMalformed([f"malformed JSON in {path}: {exc}"]) from None
    return validate_config(raw)
