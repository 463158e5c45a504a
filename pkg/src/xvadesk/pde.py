"""Finite-difference solver for the valuation-adjustment PDE.

Solves, backward from the terminal condition U(T, S) = 0,

    U_t + 1/2 sigma^2 S^2 U_SS + (q_S - gamma_S) S U_S - (r + lambda_B + lambda_C) U
      = -lambda_B (g_B - V) - lambda_C (g_C - V) + lambda_B eps_h
        + (r_X - r) X + (gamma_K - r) phi K - (r_IB - r) I_B

on [0, S_max] x [t0, T] with a theta time scheme (theta = 0.5 is
Crank-Nicolson) and central differences in space. eps_h is affine in U for
the single-bond strategy; its -lambda_B R_issued U piece is folded into the
implicit reaction coefficient rather than lagged, so the solver carries no
fixed-point error of its own and can adjudicate the Monte Carlo iteration.

Boundaries: at S = 0 the PDE degenerates to a linear ODE in t, integrated
with an exact exponential factor for the reaction and trapezoids for the
source; at S_max the second derivative is dropped (linearity). A Rannacher
start-up (the first step from T taken as two implicit half-steps) damps
oscillations seeded by the kinked (.)+/(.)- sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .closeout import HedgeStrategy, close_out_bank, close_out_cpty, funding_bond_values, hedge_error
from .contracts import MarginCapitalSpec, TradeSpec, profiles, risk_free_value
from .errors import GridError, NumericalError
from .market import MarketCurves, PiecewiseConstantCurve

__all__ = ["PdeGrid", "PdeSolution", "solve_pde", "pde_value", "pde_value_with_error"]


@dataclass(frozen=True)
class PdeGrid:
    """Discretization controls: space nodes on [0, S_max] (uniform, or log
    spacing with a zero node prepended), time step count, theta weight."""

    s_max: float
    n_space: int
    n_time: int
    theta: float = 0.5
    spacing: str = "uniform"
    rannacher: bool = True

    def __post_init__(self):
        if self.s_max <= 0.0:
            raise ValueError("s_max must be positive")
        if self.n_space < 3:
            raise ValueError("n_space must be >= 3")
        if self.n_time < 2:
            raise ValueError("n_time must be >= 2")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.spacing not in ("uniform", "log"):
            raise ValueError("spacing must be 'uniform' or 'log'")

    def nodes(self) -> np.ndarray:
        if self.spacing == "uniform":
            return np.linspace(0.0, self.s_max, self.n_space + 1)
        # log spacing over 6 decades of e, with the degenerate S=0 node kept
        lo = self.s_max * math.exp(-6.0)
        interior = np.exp(np.linspace(math.log(lo), math.log(self.s_max), self.n_space))
        return np.concatenate(([0.0], interior))

    def refined(self, factor: int = 2) -> "PdeGrid":
        return PdeGrid(self.s_max, self.n_space * factor, self.n_time * factor,
                       self.theta, self.spacing, self.rannacher)


@dataclass(eq=False)
class PdeSolution:
    """U(t, S) on the solver mesh with read-off helpers.

    ``value``/``gradient`` require t to match a mesh time (the surface is not
    interpolated in time); space lookups interpolate linearly, gradients use
    central differences on the surface.
    """

    times: np.ndarray
    s_nodes: np.ndarray
    u: np.ndarray  # shape (len(times), len(s_nodes))

    def _row(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the solution mesh")
        return self.u[i]

    def value(self, t: float, s: float) -> float:
        return float(np.interp(s, self.s_nodes, self._row(t)))

    def gradient(self, t: float, s: float) -> float:
        dus = np.gradient(self._row(t), self.s_nodes)
        return float(np.interp(s, self.s_nodes, dus))


def _value_at_zero(trade: TradeSpec, curves: MarketCurves, t: float) -> float:
    """Limit of the risk-free value as S -> 0 (PDE boundary data)."""
    disc = math.exp(-curves.r.integral(t, trade.maturity))
    if trade.kind == "forward":
        return trade.sign * (-trade.strike * disc)
    if trade.kind == "european-call":
        return 0.0
    return trade.sign * trade.strike * disc


def solve_pde(curves: MarketCurves, trade: TradeSpec, margins: MarginCapitalSpec,
              strategy: HedgeStrategy, grid: PdeGrid, t0: float = 0.0,
              times=None) -> PdeSolution:
    """Backward theta-scheme solve; returns the full U surface.

    ``times`` overrides the uniform time mesh (must be strictly increasing
    from t0 to the trade maturity); useful when a hedge simulation needs the
    surface on a particular path mesh.
    """
    T = trade.maturity
    if times is None:
        times = np.linspace(t0, T, grid.n_time + 1)
    else:
        times = np.asarray(times, dtype=float)
        if (len(times) < 3 or abs(times[0] - t0) > 1e-12 or abs(times[-1] - T) > 1e-12
                or np.any(np.diff(times) <= 0.0)):
            raise GridError("time mesh must increase strictly from t0 to maturity")
    s = grid.nodes()
    n_nodes = len(s)
    if n_nodes - 2 < 3:
        raise GridError("grid too coarse: fewer than 3 interior space nodes")
    if trade.strike > 0.0 and grid.s_max < 5.0 * trade.strike:
        raise GridError(f"s_max={grid.s_max} below 5x strike={trade.strike}")

    coupling = strategy.recovery_coupling(curves)  # raises if unsolvable
    phi = margins.phi
    var_curve = PiecewiseConstantCurve(curves.sigma.knots,
                                       tuple(v * v for v in curves.sigma.values))

    def source(t: float) -> np.ndarray:
        v = np.empty(n_nodes)
        v[0] = _value_at_zero(trade, curves, t)
        v[1:] = risk_free_value(trade, curves, t, s[1:])
        x, i_b, i_c, k = profiles(margins, v)
        phik = phi * k
        g_b = close_out_bank(v, x, i_b, curves.rb)
        g_c = close_out_cpty(v, x, i_c, curves.rc)
        if coupling == 0.0:
            eps0 = 0.0
        else:
            a1, a2 = funding_bond_values(v, g_b, x, i_b, phik, curves, strategy)
            eps0 = hedge_error(g_b, a1, a2, x, phik, i_b, curves.r1, curves.r2)
        lb, lc, rr = curves.lambda_b(t), curves.lambda_c(t), curves.r(t)
        return (-lb * (g_b - v) - lc * (g_c - v) + lb * eps0
                + (curves.r_x(t) - rr) * x
                + (curves.gamma_k(t) - rr) * phik
                - (curves.r_ib(t) - rr) * i_b)

    h_minus = np.diff(s)[:-1]
    h_plus = np.diff(s)[1:]
    h_last = s[-1] - s[-2]
    s_in = s[1:-1]

    def operator_rows(ta: float, tb: float):
        """Tridiagonal coefficients of L - k_eff on [ta, tb], curve
        coefficients averaged exactly over the step."""
        dt = tb - ta
        half_var = 0.5 * var_curve.integral(ta, tb) / dt
        conv = (curves.q_s.integral(ta, tb) - curves.gamma_s.integral(ta, tb)) / dt
        lb_avg = curves.lambda_b.integral(ta, tb) / dt
        k_eff = (curves.r.integral(ta, tb) + curves.lambda_b.integral(ta, tb)
                 + curves.lambda_c.integral(ta, tb)) / dt - coupling * lb_avg
        lower = np.zeros(n_nodes)
        diag = np.zeros(n_nodes)
        upper = np.zeros(n_nodes)
        d2 = half_var * s_in * s_in
        d1 = conv * s_in
        lower[1:-1] = d2 * 2.0 / (h_minus * (h_minus + h_plus)) \
            - d1 * h_plus / (h_minus * (h_minus + h_plus))
        upper[1:-1] = d2 * 2.0 / (h_plus * (h_minus + h_plus)) \
            + d1 * h_minus / (h_plus * (h_minus + h_plus))
        diag[1:-1] = -d2 * 2.0 / (h_minus * h_plus) \
            + d1 * (h_plus - h_minus) / (h_minus * h_plus) - k_eff
        # S_max row: U_SS = 0, one-sided first derivative
        lower[-1] = -conv * s[-1] / h_last
        diag[-1] = conv * s[-1] / h_last - k_eff
        return lower, diag, upper, k_eff

    source_cache: dict[float, np.ndarray] = {}

    def f_at(t: float) -> np.ndarray:
        if t not in source_cache:
            source_cache[t] = source(t)
        return source_cache[t]

    def advance(u_next: np.ndarray, ta: float, tb: float, theta: float) -> np.ndarray:
        dt = tb - ta
        lower, diag, upper, k_eff = operator_rows(ta, tb)
        f_a, f_b = f_at(ta), f_at(tb)
        rhs = u_next - dt * (theta * f_a + (1.0 - theta) * f_b)
        if theta < 1.0:
            lu = np.zeros(n_nodes)
            lu[1:-1] = (lower[1:-1] * u_next[:-2] + diag[1:-1] * u_next[1:-1]
                        + upper[1:-1] * u_next[2:])
            lu[-1] = lower[-1] * u_next[-2] + diag[-1] * u_next[-1]
            rhs += (1.0 - theta) * dt * lu
        ab = np.zeros((3, n_nodes))
        ab[0, 2:] = -theta * dt * upper[1:-1]
        ab[1, :] = 1.0 - theta * dt * diag
        ab[2, :-2] = -theta * dt * lower[1:-1]
        ab[2, -2] = -theta * dt * lower[-1]
        # S = 0 row: exact integrating factor for the reaction, trapezoid
        # for the source
        growth = math.exp(-k_eff * dt)
        ab[0, 1] = 0.0
        ab[1, 0] = 1.0
        rhs[0] = growth * u_next[0] - 0.5 * dt * (f_a[0] + growth * f_b[0])
        return solve_banded((1, 1), ab, rhs)

    u = np.zeros((len(times), n_nodes))
    for n in range(len(times) - 2, -1, -1):
        ta, tb = float(times[n]), float(times[n + 1])
        u_next = u[n + 1]
        if n == len(times) - 2 and grid.rannacher and grid.theta == 0.5:
            mid = 0.5 * (ta + tb)
            u_half = advance(u_next, mid, tb, 1.0)
            u[n] = advance(u_half, ta, mid, 1.0)
        else:
            u[n] = advance(u_next, ta, tb, grid.theta)
    if not np.all(np.isfinite(u)):
        raise NumericalError("PDE solve produced non-finite values "
                             f"(grid {grid.n_space}x{grid.n_time})")
    return PdeSolution(times=np.asarray(times, dtype=float), s_nodes=s, u=u)


def pde_value(curves, trade, margins, strategy, grid: PdeGrid, s0: float,
              t0: float = 0.0) -> float:
    """U(t0, S0) read off a single solve."""
    if grid.s_max < 5.0 * s0:
        raise GridError(f"s_max={grid.s_max} below 5x spot={s0}")
    return solve_pde(curves, trade, margins, strategy, grid, t0).value(t0, s0)


def pde_value_with_error(curves, trade, margins, strategy, grid: PdeGrid,
                         s0: float, t0: float = 0.0) -> tuple[float, float]:
    """U(t0, S0) from a 2x-refined solve plus a Richardson error estimate.

    The scheme is second order, so the fine-grid error is approximately
    |fine - coarse| / 3.
    """
    coarse = pde_value(curves, trade, margins, strategy, grid, s0, t0)
    fine = pde_value(curves, trade, margins, strategy, grid.refined(2), s0, t0)
    return fine, abs(fine - coarse) / 3.0
