"""Run configuration shared by the CLI subcommands.

A config file is one JSON object with the fields of :class:`RunConfig`;
unknown keys are rejected. Command-line flags override file values.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channels import fragment_probability
from .presets import NoiseSpec


class NoiseItem(BaseModel):
    model_config = ConfigDict(extra="forbid")

    qubit: int = Field(ge=0)
    axis: Literal["X", "Y", "Z", "DEP"]
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    theta: Optional[float] = None

    @field_validator("axis", mode="before")
    @classmethod
    def _upper(cls, v):
        return v.upper() if isinstance(v, str) else v

    @model_validator(mode="after")
    def _one_strength(self):
        if (self.p is None) == (self.theta is None):
            raise ValueError("give exactly one of p or theta")
        if self.theta is not None and self.axis == "DEP":
            raise ValueError("theta only applies to axis flips")
        return self

    def spec(self) -> NoiseSpec:
        p = self.p if self.p is not None else fragment_probability(self.theta)
        return NoiseSpec(self.qubit, self.axis, p)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    algo: Optional[Literal["bv", "qae", "deutsch"]] = None
    circuit: Optional[str] = None
    s: Optional[str] = Field(default=None, pattern=r"^[01]+$")
    n: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=1, le=12)
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    case: Optional[Literal["constant0", "constant1", "balanced_id", "balanced_not"]] = None
    noise: list[NoiseItem] = Field(default_factory=list)
    noise_placement: Literal["state", "detector"] = "state"
    noise_impl: Literal["kraus", "ancilla"] = "kraus"
    twirl: bool = False
    eta: Union[float, dict[int, float], None] = None
    eta_preset: Optional[Literal["ibm-low", "ibm-high"]] = None
    policy: Literal["quasi", "clip_renormalize"] = "quasi"
    mode: Literal["exact", "sampled"] = "exact"
    shots: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    n_qubits: Optional[int] = Field(default=None, ge=1, le=12)
    out: Optional[str] = None

    @field_validator("eta")
    @classmethod
    def _eta_range(cls, v):
        vals = v.values() if isinstance(v, dict) else ([] if v is None else [v])
        for e in vals:
            if not 0.0 <= e < 1.0:
                raise ValueError(f"eta must lie in [0, 1), got {e}")
        return v


class ConfigError(ValueError):
    pass


def format_validation_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def load_json(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def build_config(file_values: dict | None, overrides: dict) -> RunConfig:
    data = dict(file_values or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from None


def parse_noise(token: str) -> dict:
    """``QUBIT:AXIS:P`` or ``QUBIT:AXIS:theta=ANGLE``; AXIS is X, Y, Z or dep."""
    parts = token.split(":")
    if len(parts) != 3:
        raise ConfigError(f"noise spec {token!r} is not QUBIT:AXIS:STRENGTH")
    q, axis, strength = parts
    try:
        item = {"qubit": int(q), "axis": axis}
        if strength.startswith("theta="):
            item["theta"] = float(strength[6:])
        else:
            item["p"] = float(strength)
    except ValueError:
        raise ConfigError(f"noise spec {token!r} has a non-numeric field") from None
    return item
