"""Instance generation: random spectral-risk instances and the
Black-Scholes Monte-Carlo hedging universe.

Random instances document their distributions explicitly: mu ~ U[0, 5]
percent, loss entries i.i.d. Normal(-mu_i, 0.05), ES mixture weights
symmetric Dirichlet(1), ES levels U[0.9, 1). Budgets tighten the uniform
portfolio's risk by 10 percent so that the uniform start is always mildly
infeasible. All draws are reproducible from the seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .risk_measures import LossMatrix, SpectralMeasure, expected_shortfall, generalized_spectral_risk
from .smoothing import RiskConstraint, RiskConstraintSet
from .solver import Box, ProblemSpec, SimplexBox, lambda_star

__all__ = [
    "RandomInstanceSpec",
    "HedgingSpec",
    "HedgingModels",
    "generate_random_instance",
    "perturb_instance",
    "black_scholes_call",
    "black_scholes_binary",
    "worst_case_model_set",
    "generate_hedging_models",
    "build_hedging_problem",
    "evaluate_hedge",
]


@dataclass(frozen=True)
class RandomInstanceSpec:
    n: int
    N: int
    m: int
    d: int
    seed: int
    budget_slack: float = 0.1
    beta_low: float = 0.9
    beta_high: float = 1.0
    leverage: float = 1.0
    lam_mode: str = "star"  # "star" or "zero"

    def __post_init__(self):
        if min(self.n, self.N, self.m, self.d) < 1:
            raise ValueError("sizes must be positive")
        if not (0.0 <= self.beta_low < self.beta_high <= 1.0):
            raise ValueError("beta range must lie within [0, 1]")
        if self.lam_mode not in ("star", "zero"):
            raise ValueError("lam_mode must be 'star' or 'zero'")


def generate_random_instance(spec: RandomInstanceSpec) -> ProblemSpec:
    """Random constrained instance with budgets alpha_k = ahat_k - slack*|ahat_k|,
    ahat_k the risk of the uniform portfolio."""
    rng = np.random.default_rng(spec.seed)
    n, N, m, d = spec.n, spec.N, spec.m, spec.d

    mu = rng.uniform(0.0, 0.05, size=n)
    region = SimplexBox(B=spec.leverage)
    x_uniform = np.full(n, 1.0 / n)

    cons = []
    for _ in range(m):
        L = rng.normal(loc=-mu, scale=0.05, size=(N, n))
        gamma = rng.dirichlet(np.ones(d))
        # guard against zero mixture weights from extreme Dirichlet draws
        gamma = np.maximum(gamma, 1e-12)
        gamma = gamma / gamma.sum()
        beta = rng.uniform(spec.beta_low, spec.beta_high, size=d)
        measure = SpectralMeasure(gamma=gamma, beta=beta)
        losses = LossMatrix(entries=L)
        a_hat = generalized_spectral_risk(L @ x_uniform, measure)
        budget = a_hat - spec.budget_slack * abs(a_hat)
        cons.append(RiskConstraint(losses=losses, measure=measure, budget=budget))

    lam = lambda_star(mu, region) if spec.lam_mode == "star" else 0.0
    return ProblemSpec(
        mu=mu,
        lam=lam,
        constraints=RiskConstraintSet(models=tuple(cons)),
        region=region,
        variant="constrained",
    )


def perturb_instance(problem: ProblemSpec, t: float, seed: int) -> ProblemSpec:
    """Multiplicative loss perturbation l <- l + t|l|eps with eps std normal;
    budgets, mu, and measures are unchanged."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    rng = np.random.default_rng(seed)
    cons = []
    for con in problem.constraints:
        L = con.losses.entries
        eps = rng.standard_normal(L.shape)
        cons.append(
            RiskConstraint(
                losses=LossMatrix(entries=L + t * np.abs(L) * eps),
                measure=con.measure,
                budget=con.budget,
                offset=con.offset,
            )
        )
    return ProblemSpec(
        mu=problem.mu,
        lam=problem.lam,
        constraints=RiskConstraintSet(models=tuple(cons)),
        region=problem.region,
        variant=problem.variant,
        theta=problem.theta,
    )


def _norm_cdf(x):
    from scipy.special import ndtr

    return ndtr(x)


def black_scholes_call(S0, K, sigma, T, r) -> float | np.ndarray:
    """Vanilla European call: S0 Phi(d1) - K e^{-rT} Phi(d2)."""
    S0 = np.asarray(S0, dtype=float)
    if np.any(S0 <= 0) or K <= 0 or sigma <= 0 or T <= 0:
        raise ValueError("S0, K, sigma, T must be positive")
    d1 = (np.log(S0 / K) + (r + 0.5 * sigma**2) * T) / (sigma * np.sqrt(T))
    d2 = d1 - sigma * np.sqrt(T)
    out = S0 * _norm_cdf(d1) - K * np.exp(-r * T) * _norm_cdf(d2)
    return float(out) if out.ndim == 0 else out


def black_scholes_binary(S0, K, sigma, T, r) -> float | np.ndarray:
    """Cash-or-nothing binary call paying 1: e^{-rT} Phi(d2)."""
    S0 = np.asarray(S0, dtype=float)
    if np.any(S0 <= 0) or K <= 0 or sigma <= 0 or T <= 0:
        raise ValueError("S0, K, sigma, T must be positive")
    d1 = (np.log(S0 / K) + (r + 0.5 * sigma**2) * T) / (sigma * np.sqrt(T))
    d2 = d1 - sigma * np.sqrt(T)
    out = np.exp(-r * T) * _norm_cdf(d2)
    return float(out) if out.ndim == 0 else out


_MONTH = 1.0 / 12.0


@dataclass(frozen=True)
class HedgingSpec:
    """Hedging experiment: short ATM binary calls hedged with vanilla calls
    and the underliers, under volatility-factor uncertainty."""

    underliers: int = 4
    samples: int = 25_000
    horizon: float = _MONTH
    initial_maturities: tuple = (4 * _MONTH, 6 * _MONTH, 8 * _MONTH, 10 * _MONTH)
    strike_ratios: tuple = (0.9, 0.95, 1.0, 1.05, 1.1)
    hedge_maturities: tuple = (2 * _MONTH, 3 * _MONTH, 4 * _MONTH, 6 * _MONTH)
    spot: float = 1.0
    rate: float = 0.01
    drift: float | None = None  # None = risk-neutral (rate)
    sigma0: tuple = (0.2, 0.2, 0.2, 0.2)
    corr_offdiag: float = 0.3
    vol_factors: tuple = ((0.02, 0.02, 0.02, 0.02), (0.02, -0.02, 0.02, -0.02))
    es_level: float = 0.95
    risk_reduction: float = 0.5
    leverage: float = 1.0

    def __post_init__(self):
        if not 0 < self.risk_reduction < 1:
            raise ValueError("risk reduction factor must lie in (0, 1)")
        if np.any(np.asarray(self.sigma0) <= 0):
            raise ValueError("base volatilities must be positive")
        R = self.correlation()
        eig = np.linalg.eigvalsh(R)
        if eig.min() <= 0:
            raise ValueError("correlation matrix is not positive definite")

    def correlation(self) -> np.ndarray:
        s = self.underliers
        R = np.full((s, s), self.corr_offdiag)
        np.fill_diagonal(R, 1.0)
        return R

    @property
    def factor_count(self) -> int:
        return len(self.vol_factors)

    @property
    def instrument_count(self) -> int:
        # per asset: vanilla calls on the strike x maturity grid, plus the asset
        return self.underliers * (
            len(self.strike_ratios) * len(self.hedge_maturities) + 1
        )

    def scenario_vol(self, omega) -> np.ndarray:
        sigma = np.asarray(self.sigma0, dtype=float).copy()
        for w, f in zip(omega, self.vol_factors):
            sigma = sigma + w * np.asarray(f, dtype=float)
        if np.any(sigma <= 0):
            raise ValueError("scenario volatility must stay positive")
        return sigma


@dataclass
class HedgingModels:
    """Per-omega loss data simulated with common random numbers."""

    omegas: list
    ell0: dict  # omega -> (N,) initial-portfolio losses
    losses: dict  # omega -> (N, n) instrument losses
    mu: dict  # omega -> (n,) instrument expected returns
    mu0: dict  # omega -> scalar initial-portfolio expected return
    spec: HedgingSpec = None


def worst_case_model_set(q: int, robust: bool) -> list[tuple]:
    """Nominal set {0}; robust set {-1, 1}^q."""
    if robust:
        return [tuple(w) for w in itertools.product((-1.0, 1.0), repeat=q)]
    return [tuple(0.0 for _ in range(q))]


def _initial_portfolio_value(spec: HedgingSpec, spots: np.ndarray, ttm_shift: float, sigma: np.ndarray):
    """Value of the short-binary initial portfolio, maturities shifted by ttm_shift."""
    total = 0.0
    for a, T_i in enumerate(spec.initial_maturities):
        total = total - black_scholes_binary(
            spots[..., a], spec.spot, sigma[a], T_i - ttm_shift, spec.rate
        )
    return total


def _instrument_values(spec: HedgingSpec, spots: np.ndarray, ttm_shift: float, sigma: np.ndarray):
    """Values of all hedge instruments; spots has shape (..., s)."""
    cols = []
    for a in range(spec.underliers):
        for ratio in spec.strike_ratios:
            for T_i in spec.hedge_maturities:
                cols.append(
                    black_scholes_call(
                        spots[..., a],
                        ratio * spec.spot,
                        sigma[a],
                        T_i - ttm_shift,
                        spec.rate,
                    )
                )
        cols.append(spots[..., a])
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def generate_hedging_models(
    spec: HedgingSpec, omegas, seed: int
) -> HedgingModels:
    """Simulate losses to the horizon for each volatility scenario.

    The same standard normal draws are reused across scenarios (common random
    numbers), so omega-comparisons are low variance and identical factors
    yield bitwise-identical models.
    """
    omegas = [tuple(float(w) for w in o) for o in omegas]
    rng = np.random.default_rng(seed)
    s = spec.underliers
    N = spec.samples
    chol = np.linalg.cholesky(spec.correlation())
    normals = rng.standard_normal((N, s)) @ chol.T
    drift = spec.rate if spec.drift is None else spec.drift
    T = spec.horizon

    models = HedgingModels(
        omegas=omegas, ell0={}, losses={}, mu={}, mu0={}, spec=spec
    )
    s0 = np.full(s, spec.spot)
    for omega in omegas:
        sigma = spec.scenario_vol(omega)
        spots_T = s0 * np.exp(
            (drift - 0.5 * sigma**2) * T + np.sqrt(T) * sigma * normals
        )
        v0_init = _initial_portfolio_value(spec, s0, 0.0, np.asarray(spec.sigma0))
        vT_init = _initial_portfolio_value(spec, spots_T, T, sigma)
        ell0 = v0_init - vT_init
        v0_instr = _instrument_values(spec, s0, 0.0, np.asarray(spec.sigma0))
        vT_instr = _instrument_values(spec, spots_T, T, sigma)
        L = v0_instr - vT_instr

        models.ell0[omega] = ell0
        models.losses[omega] = L
        models.mu[omega] = -L.mean(axis=0)
        models.mu0[omega] = -float(ell0.mean())
    return models


def build_hedging_problem(
    models: HedgingModels, spec: HedgingSpec, lam: float = 0.0
) -> ProblemSpec:
    """Box-constrained reformulation of the worst-case hedging problem.

    Augments the hedge weights with epigraph variables (mu_plus, mu_minus);
    per scenario omega the epigraph row is an ES at level 0 (the sample mean)
    of ell0 + [L, 1, -1] xbar <= 0, and the risk row caps
    ES_beta(ell0 + [L, 0, 0] xbar) at risk_reduction * ES_beta(ell0).
    """
    n = spec.instrument_count
    B = spec.leverage
    mean_measure = SpectralMeasure(gamma=np.array([1.0]), beta=np.array([0.0]))
    tail_measure = SpectralMeasure(gamma=np.array([1.0]), beta=np.array([spec.es_level]))

    cons = []
    for omega in models.omegas:
        L = models.losses[omega]
        ell0 = models.ell0[omega]
        N = L.shape[0]
        ones = np.ones((N, 1))
        zeros = np.zeros((N, 2))
        L_epi = np.hstack([L, ones, -ones])
        L_risk = np.hstack([L, zeros])
        cons.append(
            RiskConstraint(
                losses=LossMatrix(entries=L_epi),
                measure=mean_measure,
                budget=0.0,
                offset=ell0,
            )
        )
        cons.append(
            RiskConstraint(
                losses=LossMatrix(entries=L_risk),
                measure=tail_measure,
                budget=spec.risk_reduction * expected_shortfall(ell0, spec.es_level),
                offset=ell0,
            )
        )

    # the epigraph variables need finite caps: with an unbounded box the
    # early continuation stages (large eta) are unbounded in mu_plus and the
    # iterate runs away. |mean(ell0 + L x)| over the box never exceeds this
    # data bound, so the caps cannot bind at the optimum.
    M = max(
        float(np.abs(models.ell0[o]).mean())
        + B * float(np.abs(models.losses[o]).mean(axis=0).sum())
        for o in models.omegas
    )
    mu_bar = np.concatenate([np.zeros(n), [lam + 1.0, lam - 1.0]])
    lower = np.concatenate([np.full(n, -B), [0.0, 0.0]])
    upper = np.concatenate([np.full(n, B), [M, M]])
    return ProblemSpec(
        mu=mu_bar,
        lam=lam,
        constraints=RiskConstraintSet(models=tuple(cons)),
        region=Box(lower=lower, upper=upper),
        variant="constrained",
    )


def hedge_weights(x_bar: np.ndarray, spec: HedgingSpec) -> np.ndarray:
    """Strip the epigraph variables from a solved augmented portfolio."""
    return np.asarray(x_bar, dtype=float)[: spec.instrument_count]


def evaluate_hedge(
    x: np.ndarray, spec: HedgingSpec, omega_grid, seed: int
) -> list[dict]:
    """Out-of-sample risk/return table on a fresh-seed omega grid.

    Each row reports the total-portfolio expected shortfall, its Monte-Carlo
    standard error (tail-sample mean error), the initial portfolio's ES, and
    the mean return of the total position.
    """
    x = np.asarray(x, dtype=float)
    omegas = [tuple(float(w) for w in o) for o in omega_grid]
    models = generate_hedging_models(spec, omegas, seed)
    rows = []
    for omega in omegas:
        total = models.ell0[omega] + models.losses[omega] @ x
        es = expected_shortfall(total, spec.es_level)
        es0 = expected_shortfall(models.ell0[omega], spec.es_level)
        kappa = max(int(np.ceil((1 - spec.es_level) * total.size)), 1)
        tail = np.sort(total)[-kappa:]
        se = float(tail.std(ddof=1) / np.sqrt(kappa)) if kappa > 1 else 0.0
        rows.append(
            {
                "omega1": omega[0],
                "omega2": omega[1] if len(omega) > 1 else 0.0,
                "es": float(es),
                "es_initial": float(es0),
                "es_stderr": se,
                "mean_return": float(models.mu0[omega] + models.mu[omega] @ x),
            }
        )
    return rows
