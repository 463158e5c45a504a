"""Close-out values, semi-replication hedge positions, and the hedge error
realized at the bank's own default.

All functions broadcast over numpy arrays so the Monte Carlo engine and the
per-step ledger share one implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StrategyUnsolvableError
from .market import MarketCurves

__all__ = [
    "close_out_bank",
    "close_out_cpty",
    "hedge_error",
    "HedgeStrategy",
    "HedgeState",
    "funding_bond_values",
    "hedge_positions",
]


def close_out_bank(v, x, i_b, r_b):
    """Close-out value to the bank at its own default:
    g_B = (V - X + I_B)+ + R_B (V - X + I_B)- + X - I_B."""
    d = v - x + i_b
    return np.maximum(d, 0.0) + r_b * np.minimum(d, 0.0) + x - i_b


def close_out_cpty(v, x, i_c, r_c):
    """Close-out value to the bank at counterparty default:
    g_C = R_C (V - X - I_C)+ + (V - X - I_C)- + X + I_C."""
    e = v - x - i_c
    return r_c * np.maximum(e, 0.0) + np.minimum(e, 0.0) + x + i_c


def hedge_error(g_b, a1p1, a2p2, x, phi_k, i_b, r_1, r_2):
    """Residual realized on the hedge at the bank's own default:
    eps_h = g_B + R_1 a_1 P_1 + R_2 a_2 P_2 - X - phi K + I_B."""
    return g_b + r_1 * a1p1 + r_2 * a2p2 - x - phi_k + i_b


@dataclass(frozen=True)
class HedgeStrategy:
    """How the own-bond funding split is closed.

    ``zero-hedge-error`` solves for both bond positions so eps_h = 0
    (requires distinct recoveries R_1 != R_2); ``single-bond`` issues only
    one seniority (by default the senior bond 2, so alpha_1 = 0).
    """

    tag: str
    issued_bond: int = 2

    def __post_init__(self):
        if self.tag not in ("zero-hedge-error", "single-bond"):
            raise ValueError(f"unknown strategy tag {self.tag!r}")
        if self.issued_bond not in (1, 2):
            raise ValueError("issued_bond must be 1 or 2")

    @property
    def label(self) -> str:
        if self.tag == "single-bond":
            return f"single-bond-{self.issued_bond}"
        return self.tag

    def recovery_coupling(self, curves: MarketCurves) -> float:
        """Recovery weight multiplying V-hat inside the funding bond values.

        Zero for the zero-hedge-error strategy (eps_h = 0 removes the
        dependence); the issued bond's recovery otherwise. Also the gate for
        solvability: zero-hedge-error needs R_1 != R_2.
        """
        if self.tag == "zero-hedge-error":
            if curves.r1 == curves.r2:
                raise StrategyUnsolvableError(
                    "zero-hedge-error strategy needs two bond seniorities with "
                    f"distinct recoveries; got R_1 = R_2 = {curves.r1}"
                )
            return 0.0
        return curves.r1 if self.issued_bond == 1 else curves.r2


def funding_bond_values(v_hat, g_b, x, i_b, phi_k, curves: MarketCurves,
                        strategy: HedgeStrategy):
    """Cash values (a_1 P_1, a_2 P_2) of the own-bond positions.

    Both strategies satisfy the funding condition
    V-hat + a_1 P_1 + a_2 P_2 + I_B - X - phi K = 0; the second equation is
    eps_h = 0 (zero-hedge-error) or a_i = 0 for the non-issued bond.
    Inputs broadcast; the 2x2 solve is linear so it also applies to
    expectations of its arguments.
    """
    shortfall = v_hat + i_b - x - phi_k
    if strategy.tag == "single-bond":
        zero = np.zeros(np.shape(shortfall)) if np.ndim(shortfall) else 0.0
        if strategy.issued_bond == 2:
            return zero, -shortfall
        return -shortfall, zero
    strategy.recovery_coupling(curves)  # raises if R_1 == R_2
    target = x + phi_k - i_b - g_b
    a1p1 = (target + curves.r2 * shortfall) / (curves.r1 - curves.r2)
    return a1p1, -shortfall - a1p1


@dataclass(frozen=True)
class HedgeState:
    """Positions and cash sub-accounts of the semi-replication portfolio at
    one instant. ``beta`` is the total cash account; the sub-accounts satisfy
    beta_S = -delta S, beta_C = -alpha_C P_C, beta_X = -X, beta_K = -phi K,
    beta_IB = I_B."""

    delta: float
    alpha_c: float
    alpha_1: float
    alpha_2: float
    beta_s: float
    beta_c: float
    beta_x: float
    beta_k: float
    beta_ib: float
    eps_h: float

    @property
    def beta(self) -> float:
        return self.beta_s + self.beta_c + self.beta_x + self.beta_k + self.beta_ib


def hedge_positions(*, v_hat: float, v: float, s: float, p1: float, p2: float,
                    pc: float, x: float, i_b: float, i_c: float, phi_k: float,
                    dvhat_ds: float, curves: MarketCurves,
                    strategy: HedgeStrategy) -> HedgeState:
    """Full hedge state at one instant.

    delta = -dV-hat/dS kills the market risk, alpha_C = (g_C - V-hat)/P_C the
    counterparty jump, and the own-bond positions come from
    :func:`funding_bond_values`. Raises StrategyUnsolvableError when the
    zero-hedge-error strategy is requested with R_1 == R_2.
    """
    if p1 <= 0.0 or p2 <= 0.0 or pc <= 0.0:
        raise ValueError("bond prices must be positive")
    g_b = float(close_out_bank(v, x, i_b, curves.rb))
    g_c = float(close_out_cpty(v, x, i_c, curves.rc))
    a1p1, a2p2 = funding_bond_values(v_hat, g_b, x, i_b, phi_k, curves, strategy)
    delta = -dvhat_ds
    alpha_c = (g_c - v_hat) / pc
    eps = hedge_error(g_b, a1p1, a2p2, x, phi_k, i_b, curves.r1, curves.r2)
    return HedgeState(
        delta=delta,
        alpha_c=alpha_c,
        alpha_1=a1p1 / p1,
        alpha_2=a2p2 / p2,
        beta_s=-delta * s,
        beta_c=-alpha_c * pc,
        beta_x=-x,
        beta_k=-phi_k,
        beta_ib=i_b,
        eps_h=float(eps),
    )
