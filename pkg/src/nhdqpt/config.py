"""Scenario files: JSON documents validated into quench scenarios.

Schema (version 1)::

    {
      "schema_version": 1,
      "model": {
        "family": "ssh" | "lindblad_ssh",
        "parameters": {"t1": 0.6, "t2": 1.0, "phi": 1.5707963267948966},
        "prequench": {"gamma": 1.5},
        "postquench": {"gamma": 0.0}
      },
      "state": {"kind": "pure_ground", "beta": null, "formulation": "non_biorthogonal"},
      "grids": {"kPoints": 2001, "tPoints": 2000, "tMax": 16.0},
      "analysis": {"normalization": "self_norm", "nMax": 5, "cuspThreshold": 20.0},
      "output": {"directory": "out", "formats": ["csv", "json"]}
    }

``phi`` is only read by ``lindblad_ssh`` and defaults to π/2.  Everything
outside ``model`` has defaults.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .loschmidt import KGrid, Normalization, QuenchScenario, TGrid
from .nhband import lindblad_effective_bloch, make_ssh
from .qstate import Formulation, InitialStateSpec, StateKind

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Parameters(_Strict):
    t1: float
    t2: float
    phi: float = np.pi / 2


class Dissipation(_Strict):
    gamma: float


class ModelBlock(_Strict):
    family: Literal["ssh", "lindblad_ssh"]
    parameters: Parameters
    prequench: Dissipation
    postquench: Dissipation

    @model_validator(mode="after")
    def _gamma_sign(self):
        if self.family == "lindblad_ssh":
            for name in ("prequench", "postquench"):
                if getattr(self, name).gamma < 0:
                    raise ValueError(f"model.{name}.gamma must be >= 0 for lindblad_ssh")
        return self


class StateBlock(_Strict):
    kind: Literal["pure_ground", "pure_excited", "gibbs", "infinite_t"] = "pure_ground"
    beta: Optional[float] = None
    formulation: Formulation = Formulation.NON_BIORTHOGONAL

    @model_validator(mode="after")
    def _beta(self):
        if self.kind == "gibbs" and (self.beta is None or not self.beta > 0):
            raise ValueError("state: gibbs needs beta > 0")
        return self


class GridBlock(_Strict):
    kPoints: int = 2001
    tPoints: int = 2000
    tMax: float = 16.0

    @field_validator("kPoints")
    @classmethod
    def _k(cls, v):
        if v < 3:
            raise ValueError("kGrid: kPoints must be >= 3")
        return v

    @field_validator("tPoints")
    @classmethod
    def _t(cls, v):
        if v < 5:
            raise ValueError("tGrid: tPoints must be >= 5")
        return v

    @field_validator("tMax")
    @classmethod
    def _tmax(cls, v):
        if not v > 0:
            raise ValueError("tGrid: tMax must be > 0")
        return v


class AnalysisBlock(_Strict):
    normalization: Normalization = Normalization.SELF_NORM
    nMax: int = Field(5, ge=1)
    cuspThreshold: float = Field(20.0, gt=0)


class OutputBlock(_Strict):
    directory: str = "out"
    formats: List[Literal["csv", "json"]] = ["csv", "json"]


class ScenarioConfig(_Strict):
    schema_version: Literal[1] = 1
    model: ModelBlock
    state: StateBlock = StateBlock()
    grids: GridBlock = GridBlock()
    analysis: AnalysisBlock = AnalysisBlock()
    output: OutputBlock = OutputBlock()

    def scenario(self) -> QuenchScenario:
        p = self.model.parameters
        onsite = 0.0
        if self.model.family == "ssh":
            h0 = make_ssh(p.t1, p.t2, self.model.prequench.gamma)
            h1 = make_ssh(p.t1, p.t2, self.model.postquench.gamma)
        else:
            h0, _ = lindblad_effective_bloch(p.t1, p.t2, self.model.prequench.gamma, p.phi)
            h1, onsite = lindblad_effective_bloch(p.t1, p.t2, self.model.postquench.gamma, p.phi)
        state = InitialStateSpec(
            kind=StateKind(self.state.kind), formulation=self.state.formulation, beta=self.state.beta
        )
        return QuenchScenario(
            h0_model=h0,
            h1_model=h1,
            state=state,
            k_grid=KGrid(self.grids.kPoints),
            t_grid=TGrid(self.grids.tPoints, self.grids.tMax),
            onsite1=onsite,
        )


def _describe(err: dict) -> str:
    loc = ".".join(str(part) for part in err["loc"])
    kind = err["type"]
    if kind == "missing":
        return f"missing key: {loc}"
    if kind == "extra_forbidden":
        return f"unknown key: {loc}"
    msg = err["msg"]
    if msg.startswith("Value error, "):
        return msg[len("Value error, "):]
    return f"{loc}: {msg}"


def parse_config(data) -> ScenarioConfig:
    """Validate a decoded JSON document; raises ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError("\n".join(_describe(e) for e in exc.errors())) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
