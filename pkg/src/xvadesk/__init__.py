"""Desk-scale valuation-adjustment engine.

Three mutually checking routes to the adjusted derivative value:

- ``mc``: Monte Carlo evaluation of the six-term breakdown
  (CVA, DVA, FCA, ColVA, KVA, MVA) on one shared path set, with a legacy
  mode reproducing the uncorrected capital/initial-margin formulae;
- ``pde``: a Crank-Nicolson finite-difference solve of the adjustment PDE;
- ``hedge``: a pathwise ledger of the semi-replication strategy whose leak
  and default jumps verify the construction step by step.
"""

from .closeout import (HedgeState, HedgeStrategy, close_out_bank, close_out_cpty,
                       funding_bond_values, hedge_error, hedge_positions)
from .config import EngineSettings, HedgeSettings, RunConfig, load_config, parse_config
from .contracts import (MarginCapitalSpec, ProfileRule, Profiles, TradeSpec, profiles,
                        risk_free_delta, risk_free_value)
from .errors import (ConfigError, FixedPointError, GridError, NumericalError,
                     StrategyUnsolvableError, XvaError)
from .hedge import DefaultScenario, LedgerPath, simulate_hedge, simulate_hedges
from .market import (MarketCurves, PathGrid, PiecewiseConstantCurve, bond_yields,
                     discount_factor, simulate_paths)
from .mc import (ExposureProfiles, FixedPointSettings, XvaBreakdown, compute_xva,
                 compute_xva_both, compute_xva_legacy, fca_fixed_point)
from .pde import PdeGrid, PdeSolution, pde_value, pde_value_with_error, solve_pde

__version__ = "0.1.0"

__all__ = [
    "MarketCurves", "PiecewiseConstantCurve", "PathGrid", "bond_yields",
    "discount_factor", "simulate_paths",
    "TradeSpec", "MarginCapitalSpec", "ProfileRule", "Profiles", "profiles",
    "risk_free_value", "risk_free_delta",
    "HedgeStrategy", "HedgeState", "close_out_bank", "close_out_cpty",
    "hedge_error", "hedge_positions", "funding_bond_values",
    "XvaBreakdown", "ExposureProfiles", "FixedPointSettings", "compute_xva",
    "compute_xva_legacy", "compute_xva_both", "fca_fixed_point",
    "PdeGrid", "PdeSolution", "solve_pde", "pde_value", "pde_value_with_error",
    "DefaultScenario", "LedgerPath", "simulate_hedge", "simulate_hedges",
    "RunConfig", "EngineSettings", "HedgeSettings", "load_config", "parse_config",
    "XvaError", "ConfigError", "NumericalError", "StrategyUnsolvableError",
    "FixedPointError", "GridError",
]
