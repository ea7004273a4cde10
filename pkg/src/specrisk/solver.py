"""Continuation driver, FISTA inner solver, and penalty recovery.

The constrained variant minimizes eta*(lam||x||_1 - mu'x) + g_nu_delta(x)
over the simple feasible set for a geometrically decreasing penalty scale
eta, calling FISTA with backtracking at each stage and threading the
curvature estimate C through stages as a warm start. The weighted and max
variants need no continuation and run a single FISTA loop with a
tightening tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .proximal_qp import L1SimplexBoxQP, solve_box_prox, solve_l1_simplex_box
from .risk_measures import generalized_spectral_risk
from .smoothing import (
    RiskConstraintSet,
    SmoothingParams,
    exact_g_max,
    smoothed_g,
    smoothed_max,
    smoothed_spectral_risk,
)

__all__ = [
    "SimplexBox",
    "Box",
    "ProblemSpec",
    "SolverConfig",
    "SolveReport",
    "FistaResult",
    "SolverError",
    "NumericalFailure",
    "fista",
    "spec_risk_allocate",
    "solve_weighted",
    "solve_max",
    "solve",
    "recover_feasible",
    "eta_star",
    "max_linear_over_region",
    "lambda_star",
]

_C_OVERFLOW = 1e16
_ETA_FLOOR_FACTOR = 1e-12


class SolverError(RuntimeError):
    pass


class NumericalFailure(SolverError):
    pass


@dataclass(frozen=True)
class SimplexBox:
    """Feasible region {1'x = 1, ||x||_inf <= B}."""

    B: float = 1.0

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("B must be positive")

    def initial_point(self, n: int) -> np.ndarray:
        if n * self.B < 1.0:
            raise ValueError("infeasible region: n*B < 1")
        return np.full(n, 1.0 / n)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return abs(x.sum() - 1.0) <= tol and np.all(np.abs(x) <= self.B + tol)


@dataclass(frozen=True)
class Box:
    """Feasible region {l <= x <= u} (entries of u may be +inf)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("bounds must be equal-length vectors")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def initial_point(self, n: int) -> np.ndarray:
        if n != self.lower.size:
            raise ValueError("dimension mismatch")
        return np.clip(np.zeros(n), self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(
            np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        )


@dataclass(frozen=True)
class ProblemSpec:
    """One portfolio selection instance.

    variant selects the objective:
      * "constrained": max mu'x - lam||x||_1 s.t. rho_k <= alpha_k (budgets live
        in ``constraints``)
      * "weighted": max mu'x - lam||x||_1 - sum theta_k rho_k, theta a vector
      * "max": max mu'x - lam||x||_1 - theta * max_k rho_k, theta a scalar
    """

    mu: np.ndarray
    lam: float
    constraints: RiskConstraintSet
    region: SimplexBox | Box
    variant: str = "constrained"
    theta: np.ndarray | float | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise ValueError("mu must be a finite vector")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.variant not in ("constrained", "weighted", "max"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "weighted":
            theta = np.asarray(self.theta, dtype=float)
            if theta.shape != (len(self.constraints),) or np.any(theta < 0):
                raise ValueError("weighted variant needs one nonnegative theta per model")
            object.__setattr__(self, "theta", theta)
        elif self.variant == "max":
            if self.theta is None or float(self.theta) < 0:
                raise ValueError("max variant needs a nonnegative scalar theta")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise ValueError("constrained variant takes no theta")
        for con in self.constraints:
            if con.losses.asset_count != mu.size:
                raise ValueError("loss matrix width must match mu")
        object.__setattr__(self, "mu", mu)

    @property
    def asset_count(self) -> int:
        return self.mu.size

    def objective(self, x: np.ndarray) -> float:
        """Exact sparse-return objective mu'x - lam*||x||_1."""
        x = np.asarray(x, dtype=float)
        return float(self.mu @ x - self.lam * np.abs(x).sum())

    def risk_values(self, x: np.ndarray) -> np.ndarray:
        """Exact generalized spectral risk per model."""
        x = np.asarray(x, dtype=float)
        return np.array(
            [
                generalized_spectral_risk(con.portfolio_losses(x), con.measure)
                for con in self.constraints
            ]
        )

    def g_max(self, x: np.ndarray) -> float:
        return exact_g_max(x, self.constraints)


@dataclass(frozen=True)
class SolverConfig:
    eta0: float = 10.0
    c_eta: float = 0.99
    tau0: float = 1e-4
    c_tau: float = 0.95
    nu: float | None = None  # default 0.01 * min nonzero |alpha_k|
    delta: float = 0.01
    varsigma: float = 1e-2
    zeta: float = 1.5
    # floor for the FISTA tolerance: below roughly sqrt(eps) the momentum
    # iterates jitter at roundoff level and the relative-change test cannot
    # be met, so further tightening only burns iterations
    tau_min: float = 1e-7
    max_outer: int = 2000
    max_inner: int = 5000
    C0: float = 1.0

    def __post_init__(self):
        if min(self.eta0, self.tau0, self.delta, self.varsigma, self.C0, self.tau_min) <= 0:
            raise ValueError("scales must be positive")
        if not (0 < self.c_eta < 1 and 0 < self.c_tau < 1):
            raise ValueError("decrease factors must lie in (0, 1)")
        if self.zeta <= 1:
            raise ValueError("backtracking factor must exceed 1")
        if self.nu is not None and self.nu <= 0:
            raise ValueError("nu must be positive")

    def resolve_nu(self, constraints: RiskConstraintSet) -> float:
        if self.nu is not None:
            return self.nu
        budgets = [abs(c.budget) for c in constraints if c.budget != 0.0]
        return 0.01 * min(budgets) if budgets else 0.01


@dataclass
class FistaResult:
    x: np.ndarray
    C: float
    inner_iters: int
    backtracks: int
    converged: bool
    objective_trace: list = field(default_factory=list)


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    risk_values: np.ndarray
    max_violation: float
    status: str
    outer_iters: int
    inner_iters_total: int
    backtracks_total: int
    eta_final: float
    C_final: float
    trace: list
    wall_time: float


def fista(
    start_x,
    C_in: float,
    l1_weight: float,
    smooth_fn,
    prox_fn,
    tau: float,
    max_inner: int = 5000,
    zeta: float = 1.5,
    record_objective: bool = False,
) -> FistaResult:
    """Accelerated proximal gradient with geometric backtracking.

    smooth_fn(y) -> (value, grad) of the smooth objective part;
    prox_fn(y, grad, C) solves the l1-penalized quadratic model over the
    feasible set. Terminates when the relative iterate change drops to tau.
    """
    x = np.asarray(start_x, dtype=float).copy()
    y = x.copy()
    C = float(C_in)
    t = 1.0
    inner = 0
    backtracks = 0
    trace: list = []
    converged = False

    while inner < max_inner:
        inner += 1
        x_prev = x
        t_prev = t
        v_y, xi = smooth_fn(y)
        # backtracking grows C on every trial and gives back one factor
        # after acceptance, so C is nondecreasing within a call
        while True:
            x = prox_fn(y, xi, C)
            dx = x - y
            F = smooth_fn(x)[0] + l1_weight * np.abs(x).sum()
            Q = (
                l1_weight * np.abs(x).sum()
                + v_y
                + xi @ dx
                + 0.5 * C * (dx @ dx)
            )
            C *= zeta
            # strict F < Q stalls when x == y at a fixed point. The dual
            # searches inside the objective re-resolve breakpoint ties under
            # tiny argument changes, which makes repeated evaluations noisy
            # at ~1e-11 relative; the guard must sit above that noise or C
            # ratchets far past the true curvature and the steps collapse.
            # Accept outright once the trial step is itself at roundoff
            # scale, where the comparison measures nothing but noise.
            if F < Q + 1e-10 * (1.0 + abs(Q)) or dx @ dx <= (
                1e-14 * (1.0 + float(np.linalg.norm(y)))
            ) ** 2:
                break
            backtracks += 1
            if C > _C_OVERFLOW:
                raise NumericalFailure("backtracking curvature overflow")
        C /= zeta
        # adaptive restart: drop the momentum whenever it points against
        # the latest step, which suppresses the ripples acceleration causes
        # near the fixed point
        if (y - x) @ (x - x_prev) > 0.0:
            t_prev = 1.0
        t = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        y = x + ((t_prev - 1.0) / t) * (x - x_prev)
        if record_objective:
            trace.append(F)
        denom = float(np.linalg.norm(x_prev))
        change = float(np.linalg.norm(x - x_prev))
        if (change / denom if denom > 0 else change) <= tau:
            converged = True
            break

    return FistaResult(
        x=x,
        C=max(C, np.finfo(float).tiny),
        inner_iters=inner,
        backtracks=backtracks,
        converged=converged,
        objective_trace=trace,
    )


def _make_prox(problem: ProblemSpec):
    region = problem.region
    if isinstance(region, SimplexBox):
        def prox(y, xi, C, eta_lam):
            x, _ = solve_l1_simplex_box(
                L1SimplexBoxQP(eta_lambda=eta_lam, xi=xi, y=y, C=C, B=region.B)
            )
            return x
    else:
        def prox(y, xi, C, eta_lam):
            return solve_box_prox(eta_lam, xi, y, C, region.lower, region.upper)
    return prox


def spec_risk_allocate(problem: ProblemSpec, config: SolverConfig | None = None) -> SolveReport:
    """Smoothed exact-penalty continuation for the constrained variant.

    Loops (x, C) <- FISTA(x, C, eta, tau), eta <- c_eta*eta, tau <- c_tau*tau
    until the relative iterate change and the exact max constraint violation
    both drop below varsigma.
    """
    if problem.variant != "constrained":
        raise ValueError("spec_risk_allocate handles the constrained variant only")
    config = config or SolverConfig()
    t0 = time.perf_counter()

    nu = config.resolve_nu(problem.constraints)
    smoothing = SmoothingParams(nu=nu, delta=config.delta)
    mu, lam = problem.mu, problem.lam
    base_prox = _make_prox(problem)

    eta = config.eta0
    tau = config.tau0
    C = config.C0
    x = problem.region.initial_point(problem.asset_count)
    eta_floor = _ETA_FLOOR_FACTOR * config.eta0

    trace = []
    inner_total = 0
    backtracks_total = 0
    status = "max_outer_reached"
    outer = 0
    inner_capped = False

    while outer < config.max_outer:
        outer += 1
        x_hat = x

        def smooth_fn(y, _eta=eta):
            value, grad, _ = smoothed_g(y, problem.constraints, smoothing)
            return value - _eta * (mu @ y), grad - _eta * mu

        def prox_fn(y, xi, Cq, _eta=eta):
            out = base_prox(y, xi, Cq, _eta * lam)
            assert problem.region.contains(out)
            return out

        res = fista(
            x, C, eta * lam, smooth_fn, prox_fn, max(tau, config.tau_min),
            max_inner=config.max_inner, zeta=config.zeta,
        )
        x, C = res.x, res.C
        inner_total += res.inner_iters
        backtracks_total += res.backtracks
        inner_capped = inner_capped or not res.converged

        denom = float(np.linalg.norm(x_hat))
        rel_change = float(np.linalg.norm(x - x_hat)) / denom if denom > 0 else float(
            np.linalg.norm(x - x_hat)
        )
        gmax = problem.g_max(x)
        trace.append(
            {
                "eta": eta,
                "tau": tau,
                "inner_iters": res.inner_iters,
                "backtracks": res.backtracks,
                "rel_change": rel_change,
                "g_max": gmax,
                "objective": problem.objective(x),
                "fista_converged": res.converged,
            }
        )

        eta *= config.c_eta
        tau *= config.c_tau

        if rel_change < config.varsigma and gmax < config.varsigma:
            status = "converged"
            break
        if eta < eta_floor:
            status = "infeasible_at_tolerance"
            break

    if status == "max_outer_reached" and problem.g_max(x) >= config.varsigma:
        status = "infeasible_at_tolerance"

    return SolveReport(
        x=x,
        objective=problem.objective(x),
        risk_values=problem.risk_values(x),
        max_violation=problem.g_max(x),
        status=status,
        outer_iters=outer,
        inner_iters_total=inner_total,
        backtracks_total=backtracks_total,
        eta_final=eta,
        C_final=C,
        trace=trace,
        wall_time=time.perf_counter() - t0,
    )


def _solve_unconstrained_risk(problem: ProblemSpec, config: SolverConfig) -> SolveReport:
    """Shared driver for the weighted and max variants: no continuation,
    a single FISTA loop with tightening tolerance."""
    t0 = time.perf_counter()
    nu = config.resolve_nu(problem.constraints)
    smoothing = SmoothingParams(nu=nu, delta=config.delta)
    mu, lam = problem.mu, problem.lam
    base_prox = _make_prox(problem)
    cons = list(problem.constraints)

    if problem.variant == "weighted":
        theta = problem.theta

        def smooth_fn(y):
            value = -float(mu @ y)
            grad = -mu.copy()
            for th, con in zip(theta, cons):
                if th == 0.0:
                    continue
                v, gz = smoothed_spectral_risk(con.portfolio_losses(y), con.measure, nu)
                value += th * v
                grad += th * (con.losses.entries.T @ gz)
            return value, grad
    else:
        theta = float(problem.theta)

        def smooth_fn(y):
            value = -float(mu @ y)
            grad = -mu.copy()
            if theta == 0.0:
                return value, grad
            vals, gzs = [], []
            for con in cons:
                v, gz = smoothed_spectral_risk(con.portfolio_losses(y), con.measure, nu)
                vals.append(v)
                gzs.append(gz)
            psi, u = smoothed_max(np.array(vals), config.delta)
            value += theta * psi
            for uk, con, gz in zip(u, cons, gzs):
                if uk != 0.0:
                    grad += theta * uk * (con.losses.entries.T @ gz)
            return value, grad

    def prox_fn(y, xi, Cq):
        out = base_prox(y, xi, Cq, lam)
        assert problem.region.contains(out)
        return out

    tau = config.tau0
    C = config.C0
    x = problem.region.initial_point(problem.asset_count)
    trace = []
    inner_total = 0
    backtracks_total = 0
    status = "max_outer_reached"
    outer = 0
    while outer < config.max_outer:
        outer += 1
        x_hat = x
        res = fista(
            x, C, lam, smooth_fn, prox_fn, max(tau, config.tau_min),
            max_inner=config.max_inner, zeta=config.zeta,
        )
        x, C = res.x, res.C
        inner_total += res.inner_iters
        backtracks_total += res.backtracks
        denom = float(np.linalg.norm(x_hat))
        rel_change = float(np.linalg.norm(x - x_hat)) / denom if denom > 0 else float(
            np.linalg.norm(x - x_hat)
        )
        trace.append(
            {
                "tau": tau,
                "inner_iters": res.inner_iters,
                "backtracks": res.backtracks,
                "rel_change": rel_change,
                "objective": problem.objective(x),
                "fista_converged": res.converged,
            }
        )
        tau *= config.c_tau
        if rel_change < config.varsigma:
            status = "converged"
            break

    return SolveReport(
        x=x,
        objective=problem.objective(x),
        risk_values=problem.risk_values(x),
        max_violation=problem.g_max(x),
        status=status,
        outer_iters=outer,
        inner_iters_total=inner_total,
        backtracks_total=backtracks_total,
        eta_final=1.0,
        C_final=C,
        trace=trace,
        wall_time=time.perf_counter() - t0,
    )


def solve_weighted(problem: ProblemSpec, config: SolverConfig | None = None) -> SolveReport:
    if problem.variant != "weighted":
        raise ValueError("solve_weighted handles the weighted variant only")
    return _solve_unconstrained_risk(problem, config or SolverConfig())


def solve_max(problem: ProblemSpec, config: SolverConfig | None = None) -> SolveReport:
    if problem.variant != "max":
        raise ValueError("solve_max handles the max variant only")
    return _solve_unconstrained_risk(problem, config or SolverConfig())


def solve(problem: ProblemSpec, config: SolverConfig | None = None) -> SolveReport:
    if problem.variant == "constrained":
        return spec_risk_allocate(problem, config)
    if problem.variant == "weighted":
        return solve_weighted(problem, config)
    return solve_max(problem, config)


def recover_feasible(x_bar, z_strict, problem: ProblemSpec) -> np.ndarray:
    """Mix a mildly infeasible point with a strictly feasible one.

    With theta = max{g_max(x_bar)/|g_max(z)|, 0}, the convex combination
    (x_bar + theta*z)/(1 + theta) has g_max <= 0 up to roundoff, by convexity
    of the risk measures.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    z = np.asarray(z_strict, dtype=float)
    gz = problem.g_max(z)
    if gz >= 0:
        raise ValueError("z must be strictly feasible (g_max(z) < 0)")
    gx = problem.g_max(x_bar)
    theta = max(gx / abs(gz), 0.0)
    return (x_bar + theta * z) / (1.0 + theta)


def eta_star(z_strict, P_u: float, problem: ProblemSpec) -> float:
    """Penalty level |g_max(z)| / (P_u - (mu'z - lam||z||_1)) that suffices
    for epsilon-optimal recovery."""
    z = np.asarray(z_strict, dtype=float)
    gz = problem.g_max(z)
    if gz >= 0:
        raise ValueError("z must be strictly feasible (g_max(z) < 0)")
    denom = P_u - problem.objective(z)
    if denom <= 0:
        raise ValueError("P_u must exceed the objective at z")
    return abs(gz) / denom


def max_linear_over_region(mu, region) -> tuple[np.ndarray, float]:
    """Exact maximizer of mu'x over the simple feasible set."""
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if isinstance(region, SimplexBox):
        B = region.B
        if n * B < 1.0:
            raise ValueError("infeasible region: n*B < 1")
        # shift to w = x + B in [0, 2B] with total mass 1 + nB, fill greedily
        mass = 1.0 + n * B
        w = np.zeros(n)
        for i in np.argsort(-mu, kind="stable"):
            take = min(2.0 * B, mass)
            w[i] = take
            mass -= take
            if mass <= 0:
                break
        x = w - B
    else:
        if not (np.all(np.isfinite(region.lower)) and np.all(np.isfinite(region.upper))):
            raise ValueError("linear maximization needs finite bounds")
        x = np.where(mu >= 0, region.upper, region.lower).astype(float)
    return x, float(mu @ x)


def lambda_star(mu, region) -> float:
    """Default sparsity weight 2|mu'x*| / ||x*||_1 with x* the vertex maximizer."""
    x, val = max_linear_over_region(mu, region)
    norm1 = float(np.abs(x).sum())
    if norm1 == 0:
        return 0.0
    return 2.0 * abs(val) / norm1
