"""Experiment configuration: strict schema, loaded from YAML or JSON."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

EXPERIMENTS = ("norm", "psi-sweep", "delta2-probe", "counterexample", "chart-roundtrip")
Experiment = Literal["norm", "psi-sweep", "delta2-probe", "counterexample", "chart-roundtrip"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhiSpec(_Strict):
    kind: Literal["exponential", "kappa"] = "exponential"
    kappa: Optional[float] = None

    @model_validator(mode="after")
    def _kappa(self):
        if self.kind == "kappa" and (self.kappa is None or not 0.0 < self.kappa < 1.0):
            raise ValueError("kappa must be given and lie in (0, 1)")
        if self.kind == "exponential" and self.kappa is not None:
            raise ValueError("kappa only applies to kind 'kappa'")
        return self


class GridSpec(_Strict):
    n: int = Field(256, ge=8)
    interval: tuple[float, float] = (0.0, 1.0)
    grading: Literal["none", "left", "right", "both"] = "left"

    @model_validator(mode="after")
    def _interval(self):
        if not self.interval[0] < self.interval[1]:
            raise ValueError("interval must satisfy a < b")
        return self


class CenterSpec(_Strict):
    kind: Literal["uniform", "density", "file"] = "uniform"
    expression: Optional[str] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _source(self):
        if self.kind == "density" and not self.expression:
            raise ValueError("a density center needs 'expression'")
        if self.kind == "file" and not self.path:
            raise ValueError("a file center needs 'path'")
        return self


class MOSpec(_Strict):
    kind: Literal["phi", "power"] = "phi"
    p: float = Field(2.0, ge=1.0)
    bound: Optional[PositiveFloat] = None


class NormParams(_Strict):
    mo: MOSpec = MOSpec(kind="power")
    fields: list[str] = ["1"]
    tol: PositiveFloat = 1e-8


class SweepParams(_Strict):
    witness: Optional[Literal["wstar", "wsubstar"]] = "wstar"
    field: Optional[str] = None
    schedule: list[float] = [0.5, 0.9, 0.99, 0.999]
    blowup_factor: PositiveFloat = 5.0

    @model_validator(mode="after")
    def _one_direction(self):
        if (self.witness is None) == (self.field is None):
            raise ValueError("give exactly one of 'witness' and 'field'")
        return self


class Delta2Params(_Strict):
    mo: MOSpec = MOSpec()
    u_range: tuple[PositiveFloat, PositiveFloat] = (1e-3, 1e6)
    points: int = Field(64, ge=16)
    slope_tol: PositiveFloat = 0.05
    t_samples: int = Field(16, ge=1)


class CounterexampleParams(_Strict):
    kind: Literal["non-delta2", "exclusion"] = "non-delta2"
    A: tuple[float, float] = (0.0, 0.25)
    B: tuple[float, float] = (0.25, 0.5)
    f: str = "1/t"
    witness: str = "s - 2*log(1 + s) + 2*log(2) - 1"
    n0: float = 5.0


class RoundtripParams(_Strict):
    fields: list[str] = ["t - 1/2", "sin(3*t)", "t**2"]
    tol: PositiveFloat = 1e-7


class ExperimentConfig(_Strict):
    experiment: Optional[Experiment] = None
    phi: PhiSpec = PhiSpec()
    grid: GridSpec = GridSpec()
    center: CenterSpec = CenterSpec()
    norm: NormParams = NormParams()
    psi_sweep: SweepParams = SweepParams()
    delta2_probe: Delta2Params = Delta2Params()
    counterexample: CounterexampleParams = CounterexampleParams()
    chart_roundtrip: RoundtripParams = RoundtripParams()
    output_path: Optional[str] = None


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Parse a YAML or JSON file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    text = Path(path).read_text()
    data = yaml.safe_load(text) if text.strip() else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError("config must be a mapping")
    return ExperimentConfig.model_validate(data)


def echo(cfg: ExperimentConfig) -> str:
    """One-line JSON echo with every default filled in; parses back to ``cfg``."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
