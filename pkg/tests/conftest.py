"""Shared scenario builders for the test suite."""

import numpy as np
import pytest

from xvadesk import HedgeStrategy, MarginCapitalSpec, MarketCurves, ProfileRule, TradeSpec

R = 0.02


def canonical_curves(**overrides) -> MarketCurves:
    """Full six-term market: every hazard and spread switched on, q_C = r."""
    base = dict(r=R, lambda_b=0.02, lambda_c=0.03, sigma=0.25, gamma_s=0.01,
                q_s=R, q_c=R, r_x=0.015, gamma_k=0.10, r_ib=0.01, mu=0.08,
                r1=0.3, r2=0.7, rb=0.4, rc=0.4)
    base.update(overrides)
    return MarketCurves(**base)


def zero_spread_curves(**overrides) -> MarketCurves:
    """Degenerate market: no hazards, every funding rate equal to r."""
    base = dict(r=R, lambda_b=0.0, lambda_c=0.0, sigma=0.25, q_s=R, q_c=R,
                r_x=R, gamma_k=R, r_ib=R, mu=0.08,
                r1=0.3, r2=0.7, rb=0.4, rc=0.4)
    base.update(overrides)
    return MarketCurves(**base)


def cva_only_curves(**overrides) -> MarketCurves:
    """Criterion-2 market: counterparty hazard only, all other spreads zero."""
    base = dict(r=R, lambda_b=0.0, lambda_c=0.03, sigma=0.25, q_s=R, q_c=R,
                r_x=R, gamma_k=R, r_ib=R, mu=0.08,
                r1=0.3, r2=0.7, rb=0.4, rc=0.4)
    base.update(overrides)
    return MarketCurves(**base)


def proportional_margins(vm=0.5, ib=0.05, ic=0.05, k=0.08, phi=0.6) -> MarginCapitalSpec:
    return MarginCapitalSpec(vm, ProfileRule("proportional", ib),
                             ProfileRule("proportional", ic),
                             ProfileRule("proportional", k), phi)


def constant_margins(vm=1.0, ib=3.0, ic=2.0, k=5.0, phi=0.6) -> MarginCapitalSpec:
    return MarginCapitalSpec(vm, ProfileRule("constant", ib),
                             ProfileRule("constant", ic),
                             ProfileRule("constant", k), phi)


@pytest.fixture
def forward_trade() -> TradeSpec:
    return TradeSpec("forward", 100.0, 1.0, 1)


@pytest.fixture
def single_bond() -> HedgeStrategy:
    return HedgeStrategy("single-bond")


@pytest.fixture
def zero_hedge_error() -> HedgeStrategy:
    return HedgeStrategy("zero-hedge-error")


def mesh(n_steps: int, maturity: float = 1.0) -> np.ndarray:
    return np.linspace(0.0, maturity, n_steps + 1)
