"""Smoothed risk measures and the smoothed constraint-violation function.

The smoothed expected shortfall is the strongly-concave-regularized dual

    f_beta(zeta; nu) = max { zeta'q - (nu/2)||q||^2 : 1'q = 1, 0 <= q <= 1/kappa }

with kappa = ceil((1-beta)N), so that ES - nu <= f <= ES holds exactly.
The smoothed max over m+1 entries uses the analogous simplex regularization.
Both inner maximizations are solved exactly by the capped-simplex dual
search; the maximizers double as the analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .proximal_qp import CappedSimplexQP, solve_capped_simplex
from .risk_measures import LossMatrix, SpectralMeasure, generalized_spectral_risk, tail_count

__all__ = [
    "SmoothingParams",
    "RiskConstraint",
    "RiskConstraintSet",
    "GradientWorkspace",
    "smoothed_es",
    "smoothed_max",
    "smoothed_spectral_risk",
    "smoothed_g",
    "exact_g_max",
]


@dataclass(frozen=True)
class SmoothingParams:
    nu: float
    delta: float

    def __post_init__(self):
        if self.nu <= 0 or self.delta <= 0:
            raise ValueError("nu and delta must be positive")


@dataclass(frozen=True)
class RiskConstraint:
    """One risk model: rho(offset + L x) <= budget.

    ``offset`` is an optional per-scenario loss vector added before measuring;
    it carries the fixed initial-portfolio losses in the hedging reformulation
    and is zero for plain portfolio constraints.
    """

    losses: LossMatrix
    measure: SpectralMeasure
    budget: float
    offset: np.ndarray | None = None

    def __post_init__(self):
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=float)
            if off.shape != (self.losses.scenario_count,):
                raise ValueError("offset length must match the scenario count")
            off.flags.writeable = False
            object.__setattr__(self, "offset", off)

    def portfolio_losses(self, x: np.ndarray) -> np.ndarray:
        z = self.losses.entries @ x
        if self.offset is not None:
            z = z + self.offset
        return z


@dataclass(frozen=True)
class RiskConstraintSet:
    models: tuple[RiskConstraint, ...]

    def __post_init__(self):
        models = tuple(self.models)
        if len(models) < 1:
            raise ValueError("need at least one risk model")
        object.__setattr__(self, "models", models)

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)


@dataclass
class GradientWorkspace:
    """Inner maximizers produced by one smoothed_g evaluation.

    q[k][l] is the capped-simplex maximizer for ES component l of model k,
    u is the outer simplex maximizer (length m+1, last entry for the
    appended 0), and portfolio_losses[k] caches offset_k + L_k x.
    """

    q: list = field(default_factory=list)
    u: np.ndarray | None = None
    portfolio_losses: list = field(default_factory=list)


def smoothed_es(zeta, beta: float, nu: float) -> tuple[float, np.ndarray]:
    """nu-smoothed expected shortfall and its gradient q*."""
    zeta = np.asarray(zeta, dtype=float)
    if nu <= 0:
        raise ValueError("nu must be positive")
    kappa = tail_count(zeta.size, beta)
    cap = 1.0 / kappa
    q, _ = solve_capped_simplex(CappedSimplexQP(c=zeta / nu, b=np.full(zeta.size, cap)))
    value = float(zeta @ q - 0.5 * nu * (q @ q))
    return value, q


def smoothed_max(t, delta: float) -> tuple[float, np.ndarray]:
    """delta-smoothed max of the entries of t and its gradient u*."""
    t = np.asarray(t, dtype=float)
    if delta <= 0:
        raise ValueError("delta must be positive")
    u, _ = solve_capped_simplex(CappedSimplexQP(c=t / delta, b=np.ones(t.size)))
    value = float(t @ u - 0.5 * delta * (u @ u))
    return value, u


def smoothed_spectral_risk(
    zeta, measure: SpectralMeasure, nu: float
) -> tuple[float, np.ndarray]:
    """ES mixture of smoothed components; the gradient is sum_l gamma_l q*_l."""
    zeta = np.asarray(zeta, dtype=float)
    value = 0.0
    grad = np.zeros_like(zeta)
    for g, b in zip(measure.gamma, measure.beta):
        v, q = smoothed_es(zeta, b, nu)
        value += g * v
        grad += g * q
    return value, grad


def _component_maximizers(zeta, measure: SpectralMeasure, nu: float):
    vals, qs = [], []
    for b in measure.beta:
        v, q = smoothed_es(zeta, b, nu)
        vals.append(v)
        qs.append(q)
    value = float(np.dot(measure.gamma, vals))
    return value, qs


def smoothed_g(
    x, constraints: RiskConstraintSet, s: SmoothingParams
) -> tuple[float, np.ndarray, GradientWorkspace]:
    """Smoothed max constraint violation, its gradient, and the dual workspace.

    value = Psi_delta(rho_1^nu(L_1 x) - a_1, ..., rho_m^nu(L_m x) - a_m, 0)
    grad  = sum_k u*_k L_k' grad rho_k^nu(L_k x)
    """
    x = np.asarray(x, dtype=float)
    ws = GradientWorkspace()
    t = np.empty(len(constraints) + 1)
    grads_zeta = []
    for k, con in enumerate(constraints):
        zeta = con.portfolio_losses(x)
        ws.portfolio_losses.append(zeta)
        value_k, qs = _component_maximizers(zeta, con.measure, s.nu)
        ws.q.append(qs)
        grads_zeta.append(
            sum(g * q for g, q in zip(con.measure.gamma, qs))
        )
        t[k] = value_k - con.budget
    t[-1] = 0.0
    value, u = smoothed_max(t, s.delta)
    ws.u = u
    grad = np.zeros_like(x)
    for k, con in enumerate(constraints):
        if u[k] != 0.0:
            grad += u[k] * (con.losses.entries.T @ grads_zeta[k])
    return float(value), grad, ws


def exact_g_max(x, constraints: RiskConstraintSet) -> float:
    """Exact max_k rho_k(offset_k + L_k x) - alpha_k (no smoothing, no 0 floor)."""
    x = np.asarray(x, dtype=float)
    return max(
        generalized_spectral_risk(con.portfolio_losses(x), con.measure) - con.budget
        for con in constraints
    )
