"""Pydantic request/response models for the solver service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class SolverConfigModel(BaseModel):
    """Optional overrides; unset fields fall back to the solver defaults."""

    eta0: Optional[float] = None
    c_eta: Optional[float] = None
    tau0: Optional[float] = None
    c_tau: Optional[float] = None
    nu: Optional[float] = None
    delta: Optional[float] = None
    varsigma: Optional[float] = None
    zeta: Optional[float] = None
    max_outer: Optional[int] = None
    max_inner: Optional[int] = None
    C0: Optional[float] = None


class GenRequest(BaseModel):
    n: int = Field(gt=0)
    N: int = Field(gt=0)
    m: int = Field(gt=0)
    d: int = Field(gt=0)
    seed: int = 0
    budget_slack: float = 0.1
    leverage: float = 1.0
    lam_mode: Literal["star", "zero"] = "star"


class InstanceResponse(BaseModel):
    instance: dict


class SolveRequest(BaseModel):
    instance: dict
    config: SolverConfigModel = SolverConfigModel()


class ReportModel(BaseModel):
    schema_name: str = Field(default="specrisk-report/1", alias="schema")
    x: list[float]
    objective: float
    risk_values: list[float]
    max_violation: float
    status: str
    outer_iters: int
    inner_iters_total: int
    backtracks_total: int
    eta_final: float
    C_final: float
    trace: list[dict[str, Any]]
    wall_time: float

    model_config = {"populate_by_name": True}


class SolveResponse(BaseModel):
    report: ReportModel


class ExportLpRequest(BaseModel):
    instance: dict
    name: str = "specrisk"


class ExportLpResponse(BaseModel):
    lp: str
    mps: str
    dims: dict


class BenchPerturbRequest(BaseModel):
    instance: dict
    t: float = Field(ge=0.0)
    S: int = Field(gt=0)
    base_seed: int = 1
    parallelism: int = Field(default=1, ge=1)
    config: SolverConfigModel = SolverConfigModel()


class BenchPerturbResponse(BaseModel):
    mu_S: float
    sigma_S: float
    cv: float
    inner_iter_counts: list[int]


class BenchScaleCase(BaseModel):
    n: int = Field(gt=0)
    N: int = Field(gt=0)
    m: int = Field(gt=0)
    d: int = Field(gt=0)
    seed: int = 0
    lam_mode: Literal["star", "zero"] = "star"


class BenchScaleRequest(BaseModel):
    cases: list[BenchScaleCase]
    config: SolverConfigModel = SolverConfigModel()


class BenchScaleResult(BaseModel):
    n: int
    N: int
    status: str
    objective: float
    max_violation: float
    inner_iters_total: int
    wall_time: float


class BenchScaleResponse(BaseModel):
    results: list[BenchScaleResult]


class HedgeRequest(BaseModel):
    mode: Literal["nominal", "robust"] = "robust"
    samples: int = Field(default=5000, gt=1)
    seed: int = 0
    eval_seed: int = 10_000
    theta: float = Field(default=0.0, ge=0.0)
    omega1_grid: list[float] = [-1.0, -0.5, 0.0, 0.5, 1.0]
    omega2_grid: list[float] = [-1.0, 0.0, 1.0]
    config: SolverConfigModel = SolverConfigModel()


class HedgeGridRow(BaseModel):
    omega1: float
    omega2: float
    es: float
    es_initial: float
    es_stderr: float
    mean_return: float
    mode: str


class HedgeResponse(BaseModel):
    report: ReportModel
    weights: list[float]
    lam: float
    grid: list[HedgeGridRow]
