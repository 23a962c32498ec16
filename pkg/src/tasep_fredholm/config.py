"""Run configuration: a single JSON document with every default filled in."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .fredholm import ObservationSpec, WindowPlan
from .lattice import RateParams


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WindowSection(_Section):
    depth: int = Field(32, ge=1)
    growth: int = Field(2, ge=2)
    tol: float = Field(1e-10, gt=0)
    max_depth: int = Field(512, ge=1)

    def plan(self) -> WindowPlan:
        return WindowPlan(self.depth, self.growth, self.tol, self.max_depth)


class MCSection(_Section):
    samples: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)


class OracleSection(_Section):
    cap: int = Field(30, ge=1)
    epsilon: float = Field(1e-10, gt=0, lt=1)
    schutz_cap: int = Field(25, ge=1)


class RunConfig(_Section):
    model: Literal["tasep", "pushasep"] = "tasep"
    r: float = Field(1.0, ge=0)
    l: float = Field(0.0, ge=0)
    x0: list[int] = [-1, -2, -3]
    n: list[int] = [3]
    a: list[int] = [-3]
    t: float | list[float] = 1.0
    window: WindowSection = WindowSection()
    mc: MCSection = MCSection()
    oracle: OracleSection = OracleSection()

    @model_validator(mode="before")
    @classmethod
    def _tasep_rates(cls, data):
        if isinstance(data, dict) and data.get("model", "tasep") == "tasep":
            if data.get("r", 1.0) != 1.0 or data.get("l", 0.0) != 0.0:
                raise ValueError("model 'tasep' fixes (r, l) = (1, 0)")
        return data

    @model_validator(mode="after")
    def _consistent(self):
        if any(p <= q for p, q in zip(self.x0, self.x0[1:])):
            raise ValueError("x0 must be strictly decreasing")
        if not self.n or len(self.n) != len(self.a):
            raise ValueError("n and a must be nonempty and of equal length")
        if any(p >= q for p, q in zip(self.n, self.n[1:])) or self.n[0] < 1:
            raise ValueError("n must be strictly increasing positive labels")
        if self.n[-1] > len(self.x0):
            raise ValueError("max(n) exceeds the number of particles in x0")
        if self.r + self.l <= 0:
            raise ValueError("at least one of r, l must be positive")
        if any(s < 0 for s in self.times):
            raise ValueError("times must be nonnegative")
        return self

    @property
    def times(self) -> list[float]:
        return list(self.t) if isinstance(self.t, list) else [self.t]

    @property
    def rates(self) -> RateParams:
        return RateParams(self.r, self.l)

    @property
    def spec(self) -> ObservationSpec:
        return ObservationSpec(tuple(self.n), tuple(self.a))

    @property
    def X0(self) -> tuple[int, ...]:
        return tuple(self.x0)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return RunConfig.model_validate_json(fh.read())
