"""Export of the equivalent large LP for external verification.

Writes the dual-lifted reformulation of the constrained problem in CPLEX-LP
and MPS text, reports exact dimensions, and provides a brute-force grid
oracle for tiny instances. The tail coefficient on the epigraph block is
1/kappa with kappa = ceil((1-beta)N), matching the exact finite-sample
expected shortfall used everywhere else, so lifted feasible points stay
feasible even when (1-beta)N is fractional.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass

import numpy as np

from .risk_measures import expected_shortfall_dual, tail_count
from .solver import Box, ProblemSpec, SimplexBox

__all__ = [
    "LPDimensions",
    "lp_dimensions",
    "export_lp",
    "export_mps",
    "parse_lp_dimensions",
    "tiny_oracle",
    "read_objective_file",
]


def _fmt(v: float) -> str:
    return f"{v:.17g}"


@dataclass(frozen=True)
class LPDimensions:
    num_vars: int
    num_constraints: int
    x_vars: int
    xi_vars: int
    z_vars: int
    y_vars: int

    def __post_init__(self):
        if self.num_vars != self.x_vars + self.xi_vars + self.z_vars + self.y_vars:
            raise ValueError("variable blocks do not add up")

    @property
    def xy_count(self) -> int:
        """The x + y sub-count (the figure usually quoted for this LP)."""
        return self.x_vars + self.y_vars

    def to_dict(self) -> dict:
        d = asdict(self)
        d["xy_count"] = self.xy_count
        return d


def _require_constrained_simplex(problem: ProblemSpec):
    if problem.variant != "constrained":
        raise ValueError("LP export applies to the constrained variant only")
    if not isinstance(problem.region, SimplexBox):
        raise ValueError("LP export applies to the simplex-box region only")


def lp_dimensions(problem: ProblemSpec) -> LPDimensions:
    _require_constrained_simplex(problem)
    n = problem.asset_count
    with_xi = problem.lam != 0.0
    z = sum(c.measure.component_count for c in problem.constraints)
    y = sum(
        c.measure.component_count * c.losses.scenario_count
        for c in problem.constraints
    )
    rows = len(problem.constraints) + y + (2 * n if with_xi else 0) + 1
    return LPDimensions(
        num_vars=n + (n if with_xi else 0) + z + y,
        num_constraints=rows,
        x_vars=n,
        xi_vars=n if with_xi else 0,
        z_vars=z,
        y_vars=y,
    )


def export_lp(problem: ProblemSpec, name: str = "specrisk") -> str:
    """CPLEX-LP text of the lifted reformulation.

    Variables: x_i free in [-B, B]; xi_i (only if lam > 0); z_k_l free;
    y_j_k_l >= 0. Rows: one risk budget per model, one epigraph row per
    (scenario, component), the two absolute-value rows per asset when
    lam > 0, and the budget row 1'x = 1.
    """
    _require_constrained_simplex(problem)
    n = problem.asset_count
    lam = problem.lam
    with_xi = lam != 0.0
    B = problem.region.B

    lines = [f"\\ {name}: spectral-risk portfolio LP", "Maximize"]
    obj_terms = []
    for i, m in enumerate(problem.mu):
        obj_terms.append(f"{'+' if m >= 0 else '-'} {_fmt(abs(m))} x_{i}")
    if with_xi:
        for i in range(n):
            obj_terms.append(f"- {_fmt(lam)} xi_{i}")
    lines.append(" obj: " + " ".join(obj_terms).lstrip("+ "))
    lines.append("Subject To")

    for k, con in enumerate(problem.constraints):
        N_k = con.losses.scenario_count
        terms = []
        for l, (g, b) in enumerate(zip(con.measure.gamma, con.measure.beta)):
            kappa = tail_count(N_k, b)
            terms.append(f"+ {_fmt(g)} z_{k}_{l}")
            coeff = g / kappa
            for j in range(N_k):
                terms.append(f"+ {_fmt(coeff)} y_{j}_{k}_{l}")
        lines.append(
            f" risk_{k}: " + " ".join(terms).lstrip("+ ") + f" <= {_fmt(con.budget)}"
        )

    for k, con in enumerate(problem.constraints):
        L = con.losses.entries
        off = con.offset
        for l in range(con.measure.component_count):
            for j in range(con.losses.scenario_count):
                terms = [f"y_{j}_{k}_{l}", f"+ z_{k}_{l}"]
                for i in range(n):
                    a = L[j, i]
                    if a != 0.0:
                        terms.append(f"{'-' if a >= 0 else '+'} {_fmt(abs(a))} x_{i}")
                rhs = 0.0 if off is None else float(off[j])
                lines.append(f" epi_{j}_{k}_{l}: " + " ".join(terms) + f" >= {_fmt(rhs)}")

    if with_xi:
        for i in range(n):
            lines.append(f" abs_p_{i}: xi_{i} - x_{i} >= 0")
            lines.append(f" abs_m_{i}: xi_{i} + x_{i} >= 0")

    lines.append(" budget: " + " + ".join(f"x_{i}" for i in range(n)) + " = 1")

    lines.append("Bounds")
    for i in range(n):
        lines.append(f" {_fmt(-B)} <= x_{i} <= {_fmt(B)}")
    for k, con in enumerate(problem.constraints):
        for l in range(con.measure.component_count):
            lines.append(f" z_{k}_{l} free")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_mps(problem: ProblemSpec, name: str = "SPECRISK") -> str:
    """Free-format MPS rendering of the same LP (maximization noted via OBJSENSE)."""
    _require_constrained_simplex(problem)
    n = problem.asset_count
    lam = problem.lam
    with_xi = lam != 0.0
    B = problem.region.B

    rows = []
    rhs = {}
    # column -> list of (row, coeff)
    cols: dict[str, list[tuple[str, float]]] = {}

    def add(col, row, coeff):
        cols.setdefault(col, []).append((row, coeff))

    for i, m in enumerate(problem.mu):
        add(f"x_{i}", "COST", float(m))
    if with_xi:
        for i in range(n):
            add(f"xi_{i}", "COST", -lam)

    for k, con in enumerate(problem.constraints):
        row = f"RISK_{k}"
        rows.append(("L", row))
        rhs[row] = con.budget
        N_k = con.losses.scenario_count
        for l, (g, b) in enumerate(zip(con.measure.gamma, con.measure.beta)):
            kappa = tail_count(N_k, b)
            add(f"z_{k}_{l}", row, float(g))
            for j in range(N_k):
                add(f"y_{j}_{k}_{l}", row, float(g / kappa))

    for k, con in enumerate(problem.constraints):
        L = con.losses.entries
        off = con.offset
        for l in range(con.measure.component_count):
            for j in range(con.losses.scenario_count):
                row = f"EPI_{j}_{k}_{l}"
                rows.append(("G", row))
                rhs[row] = 0.0 if off is None else float(off[j])
                add(f"y_{j}_{k}_{l}", row, 1.0)
                add(f"z_{k}_{l}", row, 1.0)
                for i in range(n):
                    a = float(L[j, i])
                    if a != 0.0:
                        add(f"x_{i}", row, -a)

    if with_xi:
        for i in range(n):
            rows.append(("G", f"ABSP_{i}"))
            rhs[f"ABSP_{i}"] = 0.0
            add(f"xi_{i}", f"ABSP_{i}", 1.0)
            add(f"x_{i}", f"ABSP_{i}", -1.0)
            rows.append(("G", f"ABSM_{i}"))
            rhs[f"ABSM_{i}"] = 0.0
            add(f"xi_{i}", f"ABSM_{i}", 1.0)
            add(f"x_{i}", f"ABSM_{i}", 1.0)

    rows.append(("E", "BUDGET"))
    rhs["BUDGET"] = 1.0
    for i in range(n):
        add(f"x_{i}", "BUDGET", 1.0)

    out = [f"NAME {name}", "OBJSENSE", " MAX", "ROWS", " N COST"]
    for sense, row in rows:
        out.append(f" {sense} {row}")
    out.append("COLUMNS")
    for col, entries in cols.items():
        for row, coeff in entries:
            out.append(f" {col} {row} {_fmt(coeff)}")
    out.append("RHS")
    for row, v in rhs.items():
        if v != 0.0:
            out.append(f" RHS1 {row} {_fmt(v)}")
    out.append("BOUNDS")
    for i in range(n):
        out.append(f" LO BND1 x_{i} {_fmt(-B)}")
        out.append(f" UP BND1 x_{i} {_fmt(B)}")
    if with_xi:
        for i in range(n):
            out.append(f" FR BND1 xi_{i}")
    for k, con in enumerate(problem.constraints):
        for l in range(con.measure.component_count):
            out.append(f" FR BND1 z_{k}_{l}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


_VAR_RE = re.compile(r"\b(x|xi|z|y)(?:_\d+)+\b")


def parse_lp_dimensions(lp_text: str) -> LPDimensions:
    """Recover block dimensions from an emitted CPLEX-LP document."""
    body = lp_text.split("Subject To", 1)
    names: dict[str, set[str]] = {"x": set(), "xi": set(), "z": set(), "y": set()}
    for match in _VAR_RE.finditer(lp_text):
        names[match.group(1)].add(match.group(0))
    rows = 0
    for line in body[1].split("Bounds", 1)[0].splitlines():
        if ":" in line:
            rows += 1
    return LPDimensions(
        num_vars=sum(len(v) for v in names.values()),
        num_constraints=rows,
        x_vars=len(names["x"]),
        xi_vars=len(names["xi"]),
        z_vars=len(names["z"]),
        y_vars=len(names["y"]),
    )


def lift_point(problem: ProblemSpec, x) -> dict:
    """Lift a portfolio to LP variables: z from the ES dual form,
    y_jkl = ((L_k x)_j - z_kl)^+, xi = |x|."""
    x = np.asarray(x, dtype=float)
    zs, ys = [], []
    for con in problem.constraints:
        zeta = con.portfolio_losses(x)
        z_row, y_row = [], []
        for b in con.measure.beta:
            _, z_star = expected_shortfall_dual(zeta, b)
            z_row.append(z_star)
            y_row.append(np.maximum(zeta - z_star, 0.0))
        zs.append(z_row)
        ys.append(y_row)
    return {"x": x, "xi": np.abs(x), "z": zs, "y": ys}


def lp_row_values(problem: ProblemSpec, lifted: dict) -> np.ndarray:
    """Evaluate the risk rows of the LP at a lifted point."""
    vals = []
    for k, con in enumerate(problem.constraints):
        N_k = con.losses.scenario_count
        total = 0.0
        for l, (g, b) in enumerate(zip(con.measure.gamma, con.measure.beta)):
            kappa = tail_count(N_k, b)
            total += g * (lifted["z"][k][l] + lifted["y"][k][l].sum() / kappa)
        vals.append(total)
    return np.array(vals)


def tiny_oracle(
    problem: ProblemSpec, grid_step: float, feas_tol: float = 1e-12
) -> tuple[np.ndarray | None, float]:
    """Exhaustive grid search over the feasible set for n <= 3.

    Evaluates the exact objective and exact risk constraints at every grid
    point; returns (best point, best objective) or (None, -inf) when no grid
    point is feasible.
    """
    n = problem.asset_count
    if n > 3:
        raise ValueError("tiny_oracle supports n <= 3 only")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")

    region = problem.region
    if isinstance(region, SimplexBox):
        B = region.B
        if n == 1:
            grid = np.array([[1.0]])
        elif n == 2:
            lo, hi = max(-B, 1.0 - B), min(B, 1.0 + B)
            x1 = np.arange(lo, hi + grid_step / 2, grid_step)
            grid = np.column_stack([x1, 1.0 - x1])
        else:
            axis = np.arange(-B, B + grid_step / 2, grid_step)
            x1, x2 = np.meshgrid(axis, axis, indexing="ij")
            x1 = x1.ravel()
            x2 = x2.ravel()
            x3 = 1.0 - x1 - x2
            keep = np.abs(x3) <= B
            grid = np.column_stack([x1[keep], x2[keep], x3[keep]])
    else:
        lo, hi = region.lower, region.upper
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("tiny_oracle needs finite box bounds")
        axes = [np.arange(lo[i], hi[i] + grid_step / 2, grid_step) for i in range(n)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    X = grid.T  # n x G
    feasible = np.ones(X.shape[1], dtype=bool)
    for con in problem.constraints:
        Z = con.losses.entries @ X
        if con.offset is not None:
            Z = Z + con.offset[:, None]
        Zs = np.sort(Z, axis=0)
        risk = np.zeros(X.shape[1])
        for g, b in zip(con.measure.gamma, con.measure.beta):
            kappa = tail_count(con.losses.scenario_count, b)
            risk += g * Zs[-kappa:].mean(axis=0)
        feasible &= risk <= con.budget + feas_tol

    if not np.any(feasible):
        return None, -np.inf
    obj = problem.mu @ X - problem.lam * np.abs(X).sum(axis=0)
    obj = np.where(feasible, obj, -np.inf)
    best = int(np.argmax(obj))
    return grid[best].copy(), float(obj[best])


def read_objective_file(path) -> float:
    """Parse a plain-text ``objective: <value>`` file from an external solver."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("objective:"):
                return float(line.split(":", 1)[1])
    raise ValueError(f"no 'objective:' line found in {path}")
