"""FastAPI service wrapping the solver library.

The CLI is a thin client of these endpoints; they are also usable directly
by any HTTP client. Instances travel inline as JSON payloads (schema
``specrisk-instance/1``)."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import scenario_lab
from ..instance_io import instance_to_payload, payload_to_instance, report_to_payload
from ..lp_bridge import export_lp, export_mps, lp_dimensions
from ..solver import NumericalFailure, SolverConfig, solve
from . import schemas

app = FastAPI(title="specrisk", version="0.1.0")


def _config_from_model(model: schemas.SolverConfigModel) -> SolverConfig:
    overrides = {k: v for k, v in model.model_dump().items() if v is not None}
    try:
        return SolverConfig(**overrides)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _instance(payload: dict):
    try:
        return payload_to_instance(payload)
    except (ValueError, KeyError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=f"bad instance payload: {exc}")


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/gen", response_model=schemas.InstanceResponse)
def gen(req: schemas.GenRequest):
    spec = scenario_lab.RandomInstanceSpec(
        n=req.n,
        N=req.N,
        m=req.m,
        d=req.d,
        seed=req.seed,
        budget_slack=req.budget_slack,
        leverage=req.leverage,
        lam_mode=req.lam_mode,
    )
    problem = scenario_lab.generate_random_instance(spec)
    payload = instance_to_payload(
        problem, meta={"seed": req.seed, "generator": "random/normal-dirichlet"}
    )
    return schemas.InstanceResponse(instance=payload)


@app.post("/solve", response_model=schemas.SolveResponse)
def solve_endpoint(req: schemas.SolveRequest):
    problem = _instance(req.instance)
    config = _config_from_model(req.config)
    try:
        report = solve(problem, config)
    except NumericalFailure as exc:
        raise HTTPException(status_code=500, detail=f"numerical failure: {exc}")
    return schemas.SolveResponse(report=report_to_payload(report))


@app.post("/export-lp", response_model=schemas.ExportLpResponse)
def export_lp_endpoint(req: schemas.ExportLpRequest):
    problem = _instance(req.instance)
    try:
        lp = export_lp(problem, name=req.name)
        mps = export_mps(problem, name=req.name.upper())
        dims = lp_dimensions(problem)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return schemas.ExportLpResponse(lp=lp, mps=mps, dims=dims.to_dict())


@app.post("/bench/perturb", response_model=schemas.BenchPerturbResponse)
def bench_perturb(req: schemas.BenchPerturbRequest):
    base = _instance(req.instance)
    config = _config_from_model(req.config)

    def run(s: int) -> int:
        perturbed = scenario_lab.perturb_instance(base, req.t, seed=req.base_seed + s)
        return solve(perturbed, config).inner_iters_total

    if req.parallelism > 1:
        with ThreadPoolExecutor(max_workers=req.parallelism) as pool:
            counts = list(pool.map(run, range(req.S)))
    else:
        counts = [run(s) for s in range(req.S)]
    counts_arr = np.array(counts, dtype=float)
    mu_s = float(counts_arr.mean())
    sigma_s = float(counts_arr.std(ddof=1)) if req.S > 1 else 0.0
    return schemas.BenchPerturbResponse(
        mu_S=mu_s,
        sigma_S=sigma_s,
        cv=sigma_s / mu_s if mu_s > 0 else 0.0,
        inner_iter_counts=[int(c) for c in counts],
    )


@app.post("/bench/scale", response_model=schemas.BenchScaleResponse)
def bench_scale(req: schemas.BenchScaleRequest):
    config = _config_from_model(req.config)
    results = []
    for case in req.cases:
        spec = scenario_lab.RandomInstanceSpec(
            n=case.n, N=case.N, m=case.m, d=case.d, seed=case.seed,
            lam_mode=case.lam_mode,
        )
        problem = scenario_lab.generate_random_instance(spec)
        report = solve(problem, config)
        results.append(
            schemas.BenchScaleResult(
                n=case.n,
                N=case.N,
                status=report.status,
                objective=report.objective,
                max_violation=report.max_violation,
                inner_iters_total=report.inner_iters_total,
                wall_time=report.wall_time,
            )
        )
    return schemas.BenchScaleResponse(results=results)


@app.post("/hedge", response_model=schemas.HedgeResponse)
def hedge(req: schemas.HedgeRequest):
    spec = dataclasses.replace(scenario_lab.HedgingSpec(), samples=req.samples)
    config = _config_from_model(req.config)
    omegas = scenario_lab.worst_case_model_set(
        spec.factor_count, robust=(req.mode == "robust")
    )
    models = scenario_lab.generate_hedging_models(spec, omegas, seed=req.seed)

    lam = 0.0
    if req.theta > 0:
        # two-pass sparsity weight: solve the nominal lam=0 problem first
        nominal = scenario_lab.generate_hedging_models(
            spec, scenario_lab.worst_case_model_set(spec.factor_count, robust=False),
            seed=req.seed,
        )
        base = scenario_lab.build_hedging_problem(nominal, spec, lam=0.0)
        x_star = scenario_lab.hedge_weights(solve(base, config).x, spec)
        norm1 = float(np.abs(x_star).sum())
        mu0 = nominal.mu[nominal.omegas[0]]
        if norm1 > 0:
            lam = req.theta * 2.0 * abs(float(mu0 @ x_star)) / norm1

    problem = scenario_lab.build_hedging_problem(models, spec, lam=lam)
    try:
        report = solve(problem, config)
    except NumericalFailure as exc:
        raise HTTPException(status_code=500, detail=f"numerical failure: {exc}")
    weights = scenario_lab.hedge_weights(report.x, spec)

    grid_omegas = [
        (w1, w2) for w1 in req.omega1_grid for w2 in req.omega2_grid
    ]
    rows = scenario_lab.evaluate_hedge(weights, spec, grid_omegas, seed=req.eval_seed)
    grid = [schemas.HedgeGridRow(mode=req.mode, **row) for row in rows]
    return schemas.HedgeResponse(
        report=report_to_payload(report),
        weights=[float(w) for w in weights],
        lam=lam,
        grid=grid,
    )
