"""Command-line front end: a thin client of the solver service.

By default commands run against an in-process copy of the service (no
network, fully deterministic); pass ``--server URL`` to talk to a remote
instance started with ``specrisk serve``.

Exit codes: 0 success / converged; 3 infeasible at tolerance; 4 numerical
failure; click reports usage and schema errors with its own nonzero codes.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import httpx

EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # TestClient is a synchronous httpx.Client over the ASGI app in-process
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(server: str | None, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code == 500:
        detail = resp.json().get("detail", "")
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_NUMERICAL)
    if resp.status_code != 200:
        raise click.ClickException(f"{path} failed ({resp.status_code}): {resp.text}")
    return resp.json()


def _load_config_overrides(config_file: str | None, flags: dict) -> dict:
    # precedence: flags > config file > solver defaults
    overrides: dict = {}
    if config_file:
        overrides.update(json.loads(Path(config_file).read_text()))
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return overrides


def _read_instance(path: str) -> dict:
    from .instance_io import instance_to_payload, load_instance

    return instance_to_payload(load_instance(path))


@click.group()
@click.option("--server", default=None, help="Base URL of a running specrisk service; defaults to in-process.")
@click.pass_context
def main(ctx, server):
    """Spectral-risk constrained portfolio selection toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--N", "n_samples", type=int, required=True)
@click.option("--m", type=int, default=1, show_default=True)
@click.option("--d", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--budget-slack", type=float, default=0.1, show_default=True)
@click.option("--leverage", type=float, default=1.0, show_default=True)
@click.option("--lam", type=click.Choice(["star", "zero"]), default="star", show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output prefix (writes <out>.json + <out>.bin).")
@click.pass_context
def gen(ctx, n, n_samples, m, d, seed, budget_slack, leverage, lam, out):
    """Generate a random constrained instance."""
    data = _post(
        ctx.obj["server"],
        "/gen",
        {
            "n": n,
            "N": n_samples,
            "m": m,
            "d": d,
            "seed": seed,
            "budget_slack": budget_slack,
            "leverage": leverage,
            "lam_mode": lam,
        },
    )
    from .instance_io import payload_to_instance, save_instance

    problem = payload_to_instance(data["instance"])
    json_path, bin_path = save_instance(
        problem, out, meta=data["instance"].get("meta")
    )
    click.echo(f"wrote {json_path} and {bin_path}")


_CONFIG_FLAGS = [
    ("--eta0", "eta0", float),
    ("--c-eta", "c_eta", float),
    ("--tau0", "tau0", float),
    ("--c-tau", "c_tau", float),
    ("--nu", "nu", float),
    ("--delta", "delta", float),
    ("--varsigma", "varsigma", float),
    ("--max-outer", "max_outer", int),
    ("--max-inner", "max_inner", int),
]


def _with_config_flags(cmd):
    for flag, name, typ in reversed(_CONFIG_FLAGS):
        cmd = click.option(flag, name, type=typ, default=None)(cmd)
    return cmd


@main.command()
@click.argument("instance", type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(["constrained", "weighted", "max"]), default=None)
@click.option("--theta", type=float, default=None, help="Risk weight(s) for the weighted/max variants.")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--oracle", type=click.Choice(["grid"]), default=None, help="Cross-check against the tiny grid oracle (n <= 3).")
@click.option("--out", type=click.Path(), default=None, help="Report JSON path.")
@_with_config_flags
@click.pass_context
def solve(ctx, instance, variant, theta, config_file, oracle, out, **flags):
    """Solve an instance and write a specrisk-report/1 JSON document."""
    payload = _read_instance(instance)
    if variant is not None and variant != payload.get("variant", "constrained"):
        payload["variant"] = variant
        if variant == "weighted":
            payload["theta"] = [theta if theta is not None else 1.0] * len(payload["models"])
        elif variant == "max":
            payload["theta"] = theta if theta is not None else 1.0
        else:
            payload.pop("theta", None)
    overrides = _load_config_overrides(config_file, flags)
    data = _post(ctx.obj["server"], "/solve", {"instance": payload, "config": overrides})
    report = data["report"]
    if out:
        Path(out).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    click.echo(
        f"status={report['status']} objective={report['objective']:.6g} "
        f"g_max={report['max_violation']:.3g} inner_iters={report['inner_iters_total']}"
    )
    if oracle == "grid":
        from .instance_io import payload_to_instance
        from .lp_bridge import tiny_oracle

        problem = payload_to_instance(payload)
        x_best, obj_best = tiny_oracle(problem, grid_step=1e-5)
        if x_best is None:
            click.echo("oracle: no feasible grid point")
        else:
            gap = abs(report["objective"] - obj_best) / max(abs(obj_best), 1e-12)
            click.echo(f"oracle objective={obj_best:.6g} relative gap={gap:.3g}")
    if report["status"] != "converged":
        sys.exit(EXIT_INFEASIBLE)


@main.command("export-lp")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True, help="Output prefix (<out>.lp, <out>.mps, <out>.dims.json).")
@click.pass_context
def export_lp_cmd(ctx, instance, out):
    """Emit the equivalent LP in CPLEX-LP and MPS formats plus dimensions."""
    payload = _read_instance(instance)
    data = _post(ctx.obj["server"], "/export-lp", {"instance": payload, "name": Path(out).name})
    out = Path(out)
    out.with_suffix(".lp").write_text(data["lp"])
    out.with_suffix(".mps").write_text(data["mps"])
    out.with_suffix(".dims.json").write_text(json.dumps(data["dims"], sort_keys=True, indent=1) + "\n")
    dims = data["dims"]
    click.echo(
        f"variables={dims['num_vars']} (x+y={dims['xy_count']}) "
        f"constraints={dims['num_constraints']}"
    )


@main.command("bench-perturb")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--t", type=float, default=0.05, show_default=True)
@click.option("--s", "s_count", type=int, default=30, show_default=True, help="Number of perturbed instances.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def bench_perturb(ctx, instance, t, s_count, seed, jobs, out):
    """Perturbation conditioning study: statistics of total inner iterations."""
    payload = _read_instance(instance)
    data = _post(
        ctx.obj["server"],
        "/bench/perturb",
        {"instance": payload, "t": t, "S": s_count, "base_seed": seed, "parallelism": jobs},
    )
    if out:
        Path(out).write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")
    click.echo(f"mu_S={data['mu_S']:.4g} sigma_S={data['sigma_S']:.4g} cv={data['cv']:.4g}")


@main.command("bench-scale")
@click.option("--case", "cases", multiple=True, required=True, help="Problem size n:N (repeatable).")
@click.option("--m", type=int, default=5, show_default=True)
@click.option("--d", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lam", type=click.Choice(["star", "zero"]), default="star", show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path.")
@click.pass_context
def bench_scale(ctx, cases, m, d, seed, lam, out):
    """Scaling study over a list of (n, N) sizes."""
    case_list = []
    for c in cases:
        n_str, big_n_str = c.split(":")
        case_list.append(
            {"n": int(n_str), "N": int(big_n_str), "m": m, "d": d, "seed": seed, "lam_mode": lam}
        )
    data = _post(ctx.obj["server"], "/bench/scale", {"cases": case_list})
    rows = data["results"]
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    for row in rows:
        click.echo(
            f"n={row['n']} N={row['N']} status={row['status']} "
            f"time={row['wall_time']:.2f}s inner_iters={row['inner_iters_total']}"
        )


@main.command()
@click.option("--mode", type=click.Choice(["nominal", "robust"]), default="robust", show_default=True)
@click.option("--samples", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--eval-seed", type=int, default=10_000, show_default=True)
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output prefix (<out>.report.json, <out>.grid.csv).")
@click.pass_context
def hedge(ctx, mode, samples, seed, eval_seed, theta, out):
    """Solve the hedging problem and emit the out-of-sample risk/return grid."""
    data = _post(
        ctx.obj["server"],
        "/hedge",
        {"mode": mode, "samples": samples, "seed": seed, "eval_seed": eval_seed, "theta": theta},
    )
    out = Path(out)
    out.with_suffix(".report.json").write_text(
        json.dumps({"report": data["report"], "weights": data["weights"], "lam": data["lam"]},
                   sort_keys=True, indent=1) + "\n"
    )
    with open(out.with_suffix(".grid.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["omega1", "omega2", "es", "es_initial", "es_stderr", "mean_return", "mode"]
        )
        writer.writeheader()
        writer.writerows(data["grid"])
    report = data["report"]
    click.echo(f"status={report['status']} objective={report['objective']:.6g}")
    if report["status"] != "converged":
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("specrisk.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
