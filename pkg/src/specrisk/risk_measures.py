"""Exact expected shortfall, spectral, and generalized spectral risk measures.

All measures operate on empirical loss vectors (losses positive = bad).
Everything here is a pure function of immutable inputs; the smoothed
counterparts live in :mod:`specrisk.smoothing`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossMatrix",
    "SpectralMeasure",
    "SpectrumWeights",
    "expected_shortfall",
    "expected_shortfall_dual",
    "spectral_risk",
    "convert_spectrum",
    "generalized_spectral_risk",
    "tail_count",
]

# components with gamma below this are dropped during spectrum conversion
_GAMMA_DROP_TOL = 1e-14


def _as_readonly(a, dtype=float, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LossMatrix:
    """N_k x n matrix of scenario loss realizations (rate of loss per asset)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.entries, ndim=2)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("loss matrix needs at least one scenario and one asset")
        object.__setattr__(self, "entries", arr)

    @property
    def scenario_count(self) -> int:
        return self.entries.shape[0]

    @property
    def asset_count(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class SpectralMeasure:
    """ES mixture: weights gamma (probability mass) and levels beta in [0,1)."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        gamma = _as_readonly(self.gamma, ndim=1)
        beta = _as_readonly(self.beta, ndim=1)
        if gamma.shape != beta.shape or gamma.size < 1:
            raise ValueError("gamma and beta must have equal positive length")
        if np.any(gamma < 0):
            raise ValueError("gamma must be nonnegative")
        if abs(gamma.sum() - 1.0) > 1e-12:
            raise ValueError("gamma must sum to 1")
        if np.any(beta < 0) or np.any(beta >= 1):
            raise ValueError("each beta must lie in [0, 1)")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @property
    def component_count(self) -> int:
        return self.gamma.size


@dataclass(frozen=True)
class SpectrumWeights:
    """Non-decreasing probability mass function over the N order statistics."""

    omega: np.ndarray

    def __post_init__(self):
        omega = _as_readonly(self.omega, ndim=1)
        if omega.size < 1:
            raise ValueError("omega must be non-empty")
        if np.any(omega < 0):
            raise ValueError("omega must be nonnegative")
        if np.any(np.diff(omega) < 0):
            raise ValueError("omega must be non-decreasing")
        if abs(omega.sum() - 1.0) > 1e-12:
            raise ValueError("omega must sum to 1")
        object.__setattr__(self, "omega", omega)


def tail_count(n_samples: int, beta: float) -> int:
    """Number of tail samples kappa = ceil((1-beta) N); always >= 1 for beta < 1."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    raw = (1.0 - beta) * n_samples
    # guard the ceiling against roundoff: (1 - 0.95) * 100 is slightly above 5
    kappa = int(np.ceil(raw - 1e-9 * max(1.0, raw)))
    return max(min(kappa, n_samples), 1)


def expected_shortfall(y, beta: float) -> float:
    """Average of the kappa = ceil((1-beta)N) largest entries of ``y``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    kappa = tail_count(y.size, beta)
    ys = np.sort(y)
    return float(ys[-kappa:].mean())


def expected_shortfall_dual(y, beta: float) -> tuple[float, float]:
    """Variational form min_z { z + (1/kappa) sum (y_l - z)^+ } and a minimizer.

    The objective is piecewise linear with breakpoints at the samples; the
    minimum is attained at the (N-kappa+1)-th ascending order statistic.
    Returns (value, z_star) with value == expected_shortfall(y, beta).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    n = y.size
    kappa = tail_count(n, beta)
    ys = np.sort(y)
    # suffix[i] = sum of ys[i:], so sum (y - z)^+ at z = ys[i] is
    # suffix[i+1] - (n - 1 - i) * ys[i]
    suffix = np.concatenate([np.cumsum(ys[::-1])[::-1], [0.0]])
    idx = np.arange(n)
    vals = ys + (suffix[1:] - (n - 1 - idx) * ys) / kappa
    # pick the largest minimizing breakpoint (the beta-quantile)
    best = n - 1 - int(np.argmin(vals[::-1]))
    return float(vals[best]), float(ys[best])


def spectral_risk(y, omega: SpectrumWeights) -> float:
    """Order-statistic average sum_l omega_l y_(l), y_(l) ascending."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != omega.omega.size:
        raise ValueError("y and omega must have equal length")
    return float(np.sort(y) @ omega.omega)


def convert_spectrum(omega: SpectrumWeights) -> SpectralMeasure:
    """Rewrite a spectrum as an ES mixture: gamma_l = (N-l+1)(omega_l - omega_{l-1}).

    Levels are beta_l = (l-1)/N. Components with negligible weight are dropped
    and gamma renormalized so downstream smoothing stays small.
    """
    w = omega.omega
    n = w.size
    diffs = np.diff(np.concatenate([[0.0], w]))
    ell = np.arange(1, n + 1)
    gamma = (n - ell + 1) * diffs
    beta = (ell - 1) / n
    keep = gamma > _GAMMA_DROP_TOL
    if not np.any(keep):
        raise ValueError("omega produced an empty ES mixture")
    gamma = gamma[keep]
    beta = beta[keep]
    gamma = gamma / gamma.sum()
    return SpectralMeasure(gamma=gamma, beta=beta)


def generalized_spectral_risk(y, measure: SpectralMeasure) -> float:
    """ES mixture sum_l gamma_l ES_{beta_l}(y)."""
    return float(
        sum(
            g * expected_shortfall(y, b)
            for g, b in zip(measure.gamma, measure.beta)
        )
    )
