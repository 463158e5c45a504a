"""Trade definitions, risk-free valuation, and margin/capital profile rules.

Sign conventions (fixed project-wide): values are to the bank, x+ = max(x, 0),
x- = min(x, 0), so x = x+ + x-. Variation margin X is signed (negative means
the bank has posted); initial margins and capital are non-negative by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .market import MarketCurves

__all__ = [
    "TRADE_KINDS",
    "TradeSpec",
    "risk_free_value",
    "risk_free_delta",
    "ProfileRule",
    "MarginCapitalSpec",
    "Profiles",
    "profiles",
]

TRADE_KINDS = ("forward", "european-call", "european-put")


@dataclass(frozen=True)
class TradeSpec:
    """A single trade: payoff kind, strike, maturity (years), bank-side sign."""

    kind: str
    strike: float
    maturity: float
    sign: int = 1

    def __post_init__(self):
        if self.kind not in TRADE_KINDS:
            raise ValueError(f"unknown trade kind {self.kind!r}; expected one of {TRADE_KINDS}")
        if not self.maturity > 0.0:
            raise ValueError("maturity must be positive")
        if self.strike < 0.0:
            raise ValueError("strike must be non-negative")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 (bank long) or -1 (bank short)")


def _carry_integrals(trade: TradeSpec, curves: MarketCurves, t: float):
    """Carry, discount and total-variance integrals over [t, T]."""
    T = trade.maturity
    if t > T:
        raise ValueError(f"valuation time {t} is past maturity {T}")
    carry = curves.q_s.integral(t, T) - curves.gamma_s.integral(t, T)
    disc = curves.r.integral(t, T)
    total_var = sum(
        v * v * (min(T, curves.sigma.knots[i + 1]) - max(t, curves.sigma.knots[i]))
        for i, v in enumerate(curves.sigma.values[:-1])
        if min(T, curves.sigma.knots[i + 1]) > max(t, curves.sigma.knots[i])
    )
    last = curves.sigma.values[-1]
    lo = max(t, curves.sigma.knots[-1])
    if T > lo:
        total_var += last * last * (T - lo)
    return carry, disc, total_var


def risk_free_value(trade: TradeSpec, curves: MarketCurves, t: float, s):
    """Default-free value V(t, S): discounted payoff expectation with carry
    drift q_S - gamma_S and discounting at r.

    Forwards are priced off the carry-adjusted forward price; options use the
    Black formula with total variance int_t^T sigma^2 dv. Accepts a scalar or
    an array of spots (all must be positive).
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0.0):
        raise ValueError("spot must be positive")
    carry, disc, total_var = _carry_integrals(trade, curves, t)
    df = math.exp(-disc)
    fwd = s_arr * math.exp(carry)
    k = trade.strike

    if trade.kind == "forward":
        value = df * (fwd - k)
    elif total_var <= 0.0:
        intrinsic = fwd - k if trade.kind == "european-call" else k - fwd
        value = df * np.maximum(intrinsic, 0.0)
    elif k == 0.0:
        value = df * fwd if trade.kind == "european-call" else np.zeros_like(fwd)
    else:
        sd = math.sqrt(total_var)
        d1 = (np.log(fwd / k) + 0.5 * total_var) / sd
        d2 = d1 - sd
        if trade.kind == "european-call":
            value = df * (fwd * ndtr(d1) - k * ndtr(d2))
        else:
            value = df * (k * ndtr(-d2) - fwd * ndtr(-d1))
    value = trade.sign * value
    return float(value) if np.isscalar(s) or np.ndim(s) == 0 else value


def risk_free_delta(trade: TradeSpec, curves: MarketCurves, t: float, s):
    """Analytic dV/dS under the same carry/discount conventions."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0.0):
        raise ValueError("spot must be positive")
    carry, disc, total_var = _carry_integrals(trade, curves, t)
    growth = math.exp(carry - disc)
    k = trade.strike

    if trade.kind == "forward":
        delta = np.full_like(s_arr, growth)
    elif total_var <= 0.0 or k == 0.0:
        fwd = s_arr * math.exp(carry)
        in_money = fwd > k if trade.kind == "european-call" else fwd < k
        sign_leg = 1.0 if trade.kind == "european-call" else -1.0
        delta = growth * sign_leg * in_money.astype(float)
        if k == 0.0 and trade.kind == "european-put":
            delta = np.zeros_like(s_arr)
    else:
        sd = math.sqrt(total_var)
        fwd = s_arr * math.exp(carry)
        d1 = (np.log(fwd / k) + 0.5 * total_var) / sd
        nd1 = ndtr(d1)
        delta = growth * (nd1 if trade.kind == "european-call" else nd1 - 1.0)
    delta = trade.sign * delta
    return float(delta) if np.isscalar(s) or np.ndim(s) == 0 else delta


@dataclass(frozen=True)
class ProfileRule:
    """Rule producing a non-negative profile from the contemporaneous value:
    a constant level, or proportional to |V|."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("constant", "proportional"):
            raise ValueError(f"unknown profile rule kind {self.kind!r}")
        if self.value < 0.0:
            raise ValueError("profile rule value must be non-negative")

    def apply(self, v):
        if self.kind == "constant":
            return np.full(np.shape(v), self.value) if np.ndim(v) else self.value
        out = self.value * np.abs(v)
        return float(out) if np.ndim(v) == 0 else out


class Profiles(NamedTuple):
    x: object       # variation margin held (signed)
    i_b: object     # initial margin posted by the bank (>= 0)
    i_c: object     # initial margin received from the counterparty (>= 0)
    k: object       # regulatory capital requirement (>= 0)


@dataclass(frozen=True)
class MarginCapitalSpec:
    """Variation-margin fraction, initial-margin and capital rules, and the
    fraction phi of capital available for funding."""

    vm_fraction: float
    ib_rule: ProfileRule
    ic_rule: ProfileRule
    k_rule: ProfileRule
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.vm_fraction <= 1.0:
            raise ValueError("vm_fraction must lie in [0, 1]")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")

    @classmethod
    def none(cls) -> "MarginCapitalSpec":
        """Uncollateralized, no initial margin, no capital."""
        zero = ProfileRule("constant", 0.0)
        return cls(0.0, zero, zero, zero, 0.0)


def profiles(spec: MarginCapitalSpec, v) -> Profiles:
    """Margin and capital amounts generated by value v (scalar or array)."""
    return Profiles(
        x=spec.vm_fraction * np.asarray(v) if np.ndim(v) else spec.vm_fraction * v,
        i_b=spec.ib_rule.apply(v),
        i_c=spec.ic_rule.apply(v),
        k=spec.k_rule.apply(v),
    )
