"""Serialization of instances and solve reports.

An instance is a pair of files: ``<prefix>.json`` (schema
``specrisk-instance/1``: sizes, seeds, budgets, measures, region) and
``<prefix>.bin``, a raw little-endian float64 blob holding the loss
matrices (and offsets) back to back in model order. The split keeps the
JSON human-auditable and the emission byte-deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .risk_measures import LossMatrix, SpectralMeasure
from .smoothing import RiskConstraint, RiskConstraintSet
from .solver import Box, ProblemSpec, SimplexBox, SolveReport

__all__ = [
    "INSTANCE_SCHEMA",
    "REPORT_SCHEMA",
    "instance_to_payload",
    "payload_to_instance",
    "save_instance",
    "load_instance",
    "report_to_payload",
    "save_report",
]

INSTANCE_SCHEMA = "specrisk-instance/1"
REPORT_SCHEMA = "specrisk-report/1"


def _region_payload(region) -> dict:
    if isinstance(region, SimplexBox):
        return {"kind": "simplex_box", "B": region.B}
    return {
        "kind": "box",
        "lower": region.lower.tolist(),
        "upper": [None if not np.isfinite(u) else u for u in region.upper],
    }


def _region_from_payload(payload: dict):
    if payload["kind"] == "simplex_box":
        return SimplexBox(B=payload["B"])
    upper = np.array(
        [np.inf if u is None else u for u in payload["upper"]], dtype=float
    )
    return Box(lower=np.asarray(payload["lower"], dtype=float), upper=upper)


def instance_to_payload(
    problem: ProblemSpec, meta: dict | None = None, inline_losses: bool = True
) -> dict:
    """JSON-ready description of a problem; losses inline as nested lists
    unless the caller plans to write a binary blob."""
    models = []
    for con in problem.constraints:
        entry = {
            "gamma": con.measure.gamma.tolist(),
            "beta": con.measure.beta.tolist(),
            "budget": con.budget,
            "scenarios": con.losses.scenario_count,
            "has_offset": con.offset is not None,
        }
        if inline_losses:
            entry["losses"] = con.losses.entries.tolist()
            if con.offset is not None:
                entry["offset"] = con.offset.tolist()
        models.append(entry)
    payload = {
        "schema": INSTANCE_SCHEMA,
        "n": problem.asset_count,
        "mu": problem.mu.tolist(),
        "lam": problem.lam,
        "variant": problem.variant,
        "region": _region_payload(problem.region),
        "models": models,
    }
    if problem.variant == "weighted":
        payload["theta"] = problem.theta.tolist()
    elif problem.variant == "max":
        payload["theta"] = problem.theta
    if meta:
        payload["meta"] = meta
    return payload


def payload_to_instance(payload: dict, blob: bytes | None = None) -> ProblemSpec:
    if payload.get("schema") != INSTANCE_SCHEMA:
        raise ValueError(f"unsupported instance schema {payload.get('schema')!r}")
    n = int(payload["n"])
    offset_bytes = 0
    cons = []
    for entry in payload["models"]:
        N = int(entry["scenarios"])
        if "losses" in entry:
            L = np.asarray(entry["losses"], dtype=float)
            off = (
                np.asarray(entry["offset"], dtype=float)
                if entry.get("has_offset")
                else None
            )
        else:
            if blob is None:
                raise ValueError("instance payload references a loss blob")
            count = N * n
            L = np.frombuffer(
                blob, dtype="<f8", count=count, offset=offset_bytes
            ).reshape(N, n).copy()
            offset_bytes += count * 8
            off = None
            if entry.get("has_offset"):
                off = np.frombuffer(
                    blob, dtype="<f8", count=N, offset=offset_bytes
                ).copy()
                offset_bytes += N * 8
        cons.append(
            RiskConstraint(
                losses=LossMatrix(entries=L),
                measure=SpectralMeasure(
                    gamma=np.asarray(entry["gamma"], dtype=float),
                    beta=np.asarray(entry["beta"], dtype=float),
                ),
                budget=float(entry["budget"]),
                offset=off,
            )
        )
    variant = payload.get("variant", "constrained")
    theta = payload.get("theta")
    if variant == "weighted" and theta is not None:
        theta = np.asarray(theta, dtype=float)
    return ProblemSpec(
        mu=np.asarray(payload["mu"], dtype=float),
        lam=float(payload["lam"]),
        constraints=RiskConstraintSet(models=tuple(cons)),
        region=_region_from_payload(payload["region"]),
        variant=variant,
        theta=theta,
    )


def save_instance(problem: ProblemSpec, prefix, meta: dict | None = None) -> tuple[Path, Path]:
    """Write ``<prefix>.json`` + ``<prefix>.bin``; emission is deterministic."""
    prefix = Path(prefix)
    payload = instance_to_payload(problem, meta=meta, inline_losses=False)
    payload["blob"] = prefix.name + ".bin"
    chunks = []
    for con in problem.constraints:
        chunks.append(np.ascontiguousarray(con.losses.entries, dtype="<f8").tobytes())
        if con.offset is not None:
            chunks.append(np.ascontiguousarray(con.offset, dtype="<f8").tobytes())
    json_path = prefix.with_suffix(".json")
    bin_path = prefix.with_suffix(".bin")
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    bin_path.write_bytes(b"".join(chunks))
    return json_path, bin_path


def load_instance(prefix) -> ProblemSpec:
    prefix = Path(prefix)
    json_path = prefix if prefix.suffix == ".json" else prefix.with_suffix(".json")
    payload = json.loads(json_path.read_text())
    blob = None
    if "blob" in payload:
        blob = (json_path.parent / payload["blob"]).read_bytes()
    return payload_to_instance(payload, blob=blob)


def report_to_payload(report: SolveReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "x": report.x.tolist(),
        "objective": report.objective,
        "risk_values": report.risk_values.tolist(),
        "max_violation": report.max_violation,
        "status": report.status,
        "outer_iters": report.outer_iters,
        "inner_iters_total": report.inner_iters_total,
        "backtracks_total": report.backtracks_total,
        "eta_final": report.eta_final,
        "C_final": report.C_final,
        "trace": report.trace,
        "wall_time": report.wall_time,
    }


def save_report(report: SolveReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report_to_payload(report), sort_keys=True, indent=1) + "\n")
    return path
