"""Exact solvers for the separable QP subproblems via 1-D dual breakpoint search.

Both QP families couple their coordinates only through a single budget
constraint 1'x = 1. Dualizing that constraint makes the problem separable;
the dual map gamma -> 1'x*(gamma) is piecewise linear and monotone, so the
optimal multiplier is found exactly by sorting breakpoints and interpolating
on the crossing segment. No inner tolerance is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CappedSimplexQP",
    "L1SimplexBoxQP",
    "solve_capped_simplex",
    "solve_l1_simplex_box",
    "solve_box_prox",
]


@dataclass(frozen=True)
class CappedSimplexQP:
    """max c'x - (1/2)||x||^2  s.t.  1'x = 1, 0 <= x <= b (b possibly +inf)."""

    c: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        b = np.broadcast_to(np.asarray(self.b, dtype=float), c.shape).copy()
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValueError("c must be a finite non-empty vector")
        if np.any(b < 0) or np.any(np.isnan(b)):
            raise ValueError("caps must be nonnegative")
        if b.sum() < 1.0 - 1e-9:
            raise ValueError("infeasible caps: 1'b < 1")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class L1SimplexBoxQP:
    """min eta_lambda||x||_1 + xi'(x-y) + (C/2)||x-y||^2  s.t. 1'x = 1, ||x||_inf <= B."""

    eta_lambda: float
    xi: np.ndarray
    y: np.ndarray
    C: float
    B: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if xi.shape != y.shape or xi.ndim != 1 or xi.size == 0:
            raise ValueError("xi and y must be equal-length vectors")
        if self.eta_lambda < 0:
            raise ValueError("eta_lambda must be nonnegative")
        if self.C <= 0 or self.B <= 0:
            raise ValueError("C and B must be positive")
        if xi.size * self.B < 1.0:
            raise ValueError("infeasible: n*B < 1")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "y", y)


def _dual_search(g_hi, g_lo, val_hi, rate, target):
    """Find gamma* with sum_i f_i(gamma*) = target.

    Each f_i equals val_hi[i] for gamma >= g_hi[i], grows at ``rate`` per unit
    decrease of gamma on [g_lo[i], g_hi[i]], and is constant below g_lo[i]
    (g_lo may be -inf, in which case the piece never flattens out). The sum is
    non-increasing in gamma; ties are resolved by returning the midpoint of
    the flat segment of optimal multipliers.
    """
    g_hi = np.asarray(g_hi, dtype=float)
    g_lo = np.asarray(g_lo, dtype=float)
    val_hi = np.asarray(val_hi, dtype=float)

    s_top = val_hi.sum()
    finite_lo = np.isfinite(g_lo)
    s_bot = s_top + rate * np.sum(g_hi[finite_lo] - g_lo[finite_lo])
    if not np.all(finite_lo):
        s_bot = np.inf
    if target < s_top - 1e-9 or target > s_bot + 1e-9:
        raise ValueError("target outside the range of the dual map")
    if target <= s_top:
        return float(np.max(g_hi))

    pos = np.concatenate([g_hi, g_lo[finite_lo]])
    delta = np.concatenate(
        [np.full(g_hi.size, rate), np.full(int(finite_lo.sum()), -rate)]
    )
    order = np.argsort(-pos, kind="stable")
    pos = pos[order]
    delta = delta[order]

    slope = np.cumsum(delta)  # slope (per unit gamma decrease) below pos[j]
    seg = pos[:-1] - pos[1:]
    # s at each event point, scanning gamma downward
    s = s_top + np.concatenate([[0.0], np.cumsum(slope[:-1] * seg)])

    idx = int(np.searchsorted(s, target, side="left"))
    if idx >= s.size:
        # crossing beyond the last event: if every piece has flattened the
        # map saturates at s[-1]; target can only exceed that by roundoff
        # (range-checked above), so the last event is the answer
        if slope[-1] <= 0:
            return float(pos[-1])
        return float(pos[-1] - (target - s[-1]) / slope[-1])
    if s[idx] > target:
        m = slope[idx - 1]
        return float(pos[idx - 1] - (target - s[idx - 1]) / m)
    # exact hit: locate the flat stretch of multipliers achieving the target
    hi = float(pos[idx])
    j = int(np.searchsorted(s, target, side="right")) - 1
    lo = float(pos[j])
    return 0.5 * (hi + lo)


def solve_capped_simplex(qp: CappedSimplexQP) -> tuple[np.ndarray, float]:
    """Exact maximizer of c'x - ||x||^2/2 over the capped simplex.

    Coordinatewise x_i(gamma) = clip(c_i - gamma, 0, b_i); gamma* solves
    1'x(gamma*) = 1 by breakpoint scan over {c_i} and {c_i - b_i}.
    """
    c, b = qp.c, qp.b
    # the dual map is shift invariant (c -> c - s moves gamma* by -s with the
    # same x); centering c keeps the breakpoint arithmetic well conditioned
    # when c is large with a small spread, which otherwise cancels the caps
    # out of g_hi - g_lo and breaks the range check
    shift = float(np.median(c))
    cs = c - shift
    g_lo = np.where(np.isfinite(b), cs - b, -np.inf)
    gamma = _dual_search(cs, g_lo, np.zeros_like(c), 1.0, 1.0) + shift
    x = np.clip(c - gamma, 0.0, b)
    return x, gamma


def solve_l1_simplex_box(qp: L1SimplexBoxQP) -> tuple[np.ndarray, float]:
    """Exact solution of the l1-penalized prox QP over {1'x = 1, ||x||_inf <= B}.

    Splitting x = w - v with w, v >= 0 gives the coordinatewise dual map
    x_i(gamma) = clip((cbar_i - gamma)/C, 0, B) - clip((cund_i + gamma)/C, 0, B)
    with cbar_i = -eta_lambda - xi_i + C y_i and cund_i = -eta_lambda + xi_i - C y_i.
    """
    el, xi, y, C, B = qp.eta_lambda, qp.xi, qp.y, qp.C, qp.B
    cbar = -el - xi + C * y
    cund = -el + xi - C * y
    # w_i contributes clip((cbar_i - g)/C, 0, B): flat 0 above cbar_i
    # -v_i contributes -clip((cund_i + g)/C, 0, B): flat -B above C*B - cund_i
    g_hi = np.concatenate([cbar, C * B - cund])
    g_lo = np.concatenate([cbar - C * B, -cund])
    val_hi = np.concatenate([np.zeros_like(cbar), np.full_like(cund, -B)])
    gamma = _dual_search(g_hi, g_lo, val_hi, 1.0 / C, 1.0)
    w = np.clip((cbar - gamma) / C, 0.0, B)
    v = np.clip((cund + gamma) / C, 0.0, B)
    # the split is exact: both halves are never simultaneously active
    assert float(np.minimum(w, v).max(initial=0.0)) <= 1e-12
    return w - v, gamma


def solve_box_prox(eta_lambda, xi, y, C, l, u) -> np.ndarray:
    """Coordinatewise soft-threshold-and-clip prox for plain box constraints.

    Minimizes eta_lambda|x_i| + xi_i (x_i - y_i) + (C/2)(x_i - y_i)^2 over
    [l_i, u_i]; no dual search is needed because there is no coupling row.
    """
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=float)
    l = np.broadcast_to(np.asarray(l, dtype=float), xi.shape)
    u = np.broadcast_to(np.asarray(u, dtype=float), xi.shape)
    if np.any(l > u):
        raise ValueError("lower bound exceeds upper bound")
    if eta_lambda < 0 or C <= 0:
        raise ValueError("eta_lambda must be >= 0 and C > 0")
    t = y - xi / C
    x = np.sign(t) * np.maximum(np.abs(t) - eta_lambda / C, 0.0)
    return np.clip(x, l, u)
