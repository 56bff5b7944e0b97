from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ustatlab.interp import SolverSettings
from ustatlab.spaces import MAX_ELEMENTS


class ExperimentConfig(BaseModel):
    """A flat experiment description; command-line flags override file keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    check: str = Field(..., description="Registered check id, or a pipeline name for `decompose`")
    variant: str | None = Field(None, description="Check variant; filled from the registry entry when omitted")
    omega: int = Field(2, ge=1, le=64, description="Number of atoms of the base probability space")
    n: int = Field(2, ge=1, le=16, description="Number of independent coordinates / index range")
    m: int = Field(1, ge=1, le=3, description="Kernel arity")
    j: int = Field(1, ge=1, le=8, description="Size of the inner index set J")
    value_dim: int | None = Field(None, ge=1, le=16, description="Dimension of a Hilbert value axis")
    p: float = Field(2.0, gt=0.0, description="Main exponent")
    q: float = Field(1.0, gt=0.0, description="Secondary exponent (decoupling, duality, theta-q)")
    kappa: float = Field(1.0, gt=0.0, le=1.0, description="Weight threshold")
    eps: float = Field(0.0, ge=0.0, lt=1.0, description="Weight floor")
    theta: float = Field(0.5, gt=0.0, lt=1.0, description="Interpolation parameter")
    t: float = Field(1.0, gt=0.0, description="K-functional parameter")
    level: int = Field(1, ge=0, le=16, description="Hoeffding level M")
    binary: bool = Field(True, description="Draw binary weights in the weighted lower bound")
    weights: Literal["uniform", "random"] = Field("uniform", description="Atom weights of the base space")
    couple: str = Field("L1,L2", description="K-functional couple, e.g. `L1,L2` or `L1(l2),L2(l2)`")
    count: int = Field(1, ge=1, description="Number of seeded instances")
    seed: int = Field(0, ge=0, lt=2**64, description="Master seed")
    method: Literal["exact", "mc"] = Field("exact", description="Exact enumeration or Monte Carlo")
    mc_samples: int = Field(100_000, ge=1, description="Monte Carlo sample count")
    tol: float = Field(1e-8, gt=0.0, description="Solver tolerance")
    max_iters: int = Field(20_000, ge=1, description="Solver iteration cap")
    patience: int = Field(200, ge=1, description="Solver stagnation window")
    cap: float | None = Field(None, gt=0.0, description="Override of the certificate cap")
    budget: int = Field(1, ge=1, description="Evaluation budget of extremal search")
    threads: int = Field(1, ge=1, description="Worker threads")
    out: str | None = Field(None, description="Output directory")
    format: Literal["jsonl", "csv", "both"] = Field("both", description="Report formats written")
    timing: bool = Field(False, description="Write runtime_ms into reports")

    @field_validator("p", "q", "t")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @model_validator(mode="after")
    def _ranges(self) -> ExperimentConfig:
        if self.eps >= self.kappa:
            raise ValueError("kappa must exceed eps")
        if self.omega**self.n > MAX_ELEMENTS:
            raise ValueError(f"omega**n = {self.omega**self.n} exceeds the size guard {MAX_ELEMENTS}")
        return self

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(max_iters=self.max_iters, tol=self.tol, patience=self.patience)
