"""Run configuration: one human-editable JSON file with explicit units
(rates per year, times in years).

A parsed :class:`RunConfig` serializes back through :meth:`RunConfig.to_dict`
to a canonical form that reparses to an equal object, which is what the CLI
emits as the effective config of every run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .closeout import HedgeStrategy
from .contracts import MarginCapitalSpec, ProfileRule, TradeSpec
from .errors import ConfigError
from .hedge import DefaultScenario
from .market import MarketCurves, PiecewiseConstantCurve
from .mc import FixedPointSettings
from .pde import PdeGrid

__all__ = ["RunConfig", "EngineSettings", "HedgeSettings", "load_config", "parse_config"]

_CURVE_FIELDS = ("r", "lambda_b", "lambda_c", "sigma", "gamma_s", "q_s", "q_c",
                 "r_x", "gamma_k", "r_ib", "mu")
_RECOVERY_FIELDS = ("r1", "r2", "rb", "rc")
MODES = ("corrected", "legacy", "both")


@dataclass(frozen=True)
class HedgeSettings:
    n_paths: int = 8
    measure: str = "real-world"
    scenario: DefaultScenario = DefaultScenario()
    pde_refine: int = 1  # surface time mesh = path mesh subdivided this many times

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigError("hedge.n_paths must be >= 1")
        if self.measure not in ("real-world", "pricing"):
            raise ConfigError("hedge.measure must be 'real-world' or 'pricing'")
        if self.pde_refine < 1:
            raise ConfigError("hedge.pde_refine must be >= 1")


@dataclass(frozen=True)
class EngineSettings:
    s0: float
    seed: int
    n_paths: int = 10000
    n_steps: int = 100
    antithetic: bool = False
    quad_stride: int = 1
    mode: str = "corrected"
    r_ic: PiecewiseConstantCurve | None = None
    fixed_point: FixedPointSettings = FixedPointSettings()
    pde: PdeGrid = PdeGrid(s_max=500.0, n_space=400, n_time=400)
    hedge: HedgeSettings = HedgeSettings()

    def __post_init__(self):
        if self.s0 <= 0.0:
            raise ConfigError("engine.s0 must be positive")
        if self.n_paths < 1:
            raise ConfigError("engine.n_paths must be >= 1")
        if self.n_steps < 1:
            raise ConfigError("engine.n_steps must be >= 1")
        if self.quad_stride < 1 or self.n_steps % self.quad_stride != 0:
            raise ConfigError("engine.quad_stride must divide n_steps")
        if self.mode not in MODES:
            raise ConfigError(f"engine.mode must be one of {MODES}")


@dataclass(frozen=True)
class RunConfig:
    curves: MarketCurves
    trade: TradeSpec
    margins: MarginCapitalSpec
    strategy: HedgeStrategy
    engine: EngineSettings

    def path_times(self) -> np.ndarray:
        return np.linspace(0.0, self.trade.maturity, self.engine.n_steps + 1)

    def quad_times(self) -> np.ndarray:
        return self.path_times()[:: self.engine.quad_stride]

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, engine=replace(self.engine, seed=int(seed)))

    def to_dict(self) -> dict:
        c = self.curves
        curves = {name: _curve_to_dict(getattr(c, name)) for name in _CURVE_FIELDS}
        curves["recoveries"] = {name: getattr(c, name) for name in _RECOVERY_FIELDS}
        e = self.engine
        return {
            "curves": curves,
            "trade": {"kind": self.trade.kind, "strike": self.trade.strike,
                      "maturity": self.trade.maturity, "sign": self.trade.sign},
            "margins": {
                "vm_fraction": self.margins.vm_fraction,
                "ib_rule": _rule_to_dict(self.margins.ib_rule),
                "ic_rule": _rule_to_dict(self.margins.ic_rule),
                "k_rule": _rule_to_dict(self.margins.k_rule),
                "phi": self.margins.phi,
            },
            "strategy": {"tag": self.strategy.tag,
                         "issued_bond": self.strategy.issued_bond},
            "engine": {
                "s0": e.s0,
                "seed": e.seed,
                "n_paths": e.n_paths,
                "n_steps": e.n_steps,
                "antithetic": e.antithetic,
                "quad_stride": e.quad_stride,
                "mode": e.mode,
                "r_ic": None if e.r_ic is None else _curve_to_dict(e.r_ic),
                "fixed_point": {"tolerance": e.fixed_point.tolerance,
                                "max_iterations": e.fixed_point.max_iterations},
                "pde": {"s_max": e.pde.s_max, "n_space": e.pde.n_space,
                        "n_time": e.pde.n_time, "theta": e.pde.theta,
                        "spacing": e.pde.spacing, "rannacher": e.pde.rannacher},
                "hedge": {
                    "n_paths": e.hedge.n_paths,
                    "measure": e.hedge.measure,
                    "scenario": {"kind": e.hedge.scenario.kind,
                                 "time": e.hedge.scenario.time,
                                 "seed": e.hedge.scenario.seed},
                    "pde_refine": e.hedge.pde_refine,
                },
            },
        }


def _curve_to_dict(curve: PiecewiseConstantCurve) -> dict:
    return {"knots": list(curve.knots), "values": list(curve.values)}


def _rule_to_dict(rule: ProfileRule) -> dict:
    return {"kind": rule.kind, "value": rule.value}


def _parse_curve(spec, mesh, context: str) -> PiecewiseConstantCurve:
    try:
        if isinstance(spec, bool):
            raise ConfigError(f"{context}: expected a rate, got a boolean")
        if isinstance(spec, (int, float)):
            return PiecewiseConstantCurve.flat(float(spec))
        if isinstance(spec, list):
            if mesh is None:
                raise ConfigError(f"{context}: list form needs a 'mesh' in the curves block")
            if len(spec) != len(mesh):
                raise ConfigError(f"{context}: {len(spec)} values for {len(mesh)} mesh knots")
            return PiecewiseConstantCurve(mesh, spec)
        if isinstance(spec, dict):
            return PiecewiseConstantCurve(spec["knots"], spec["values"])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    raise ConfigError(f"{context}: expected a number, list, or knots/values object")


def _require(block: dict, key: str, context: str):
    if key not in block:
        raise ConfigError(f"missing required field {context}.{key}")
    return block[key]


def _block(data: dict, key: str) -> dict:
    block = _require(data, key, "config")
    if not isinstance(block, dict):
        raise ConfigError(f"config.{key} must be an object")
    return block


def _parse_rule(spec, context: str) -> ProfileRule:
    if not isinstance(spec, dict):
        raise ConfigError(f"{context} must be an object with 'kind' and 'value'")
    try:
        return ProfileRule(_require(spec, "kind", context), float(_require(spec, "value", context)))
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    cb = _block(data, "curves")
    mesh = cb.get("mesh")
    curve_kwargs = {}
    for name in _CURVE_FIELDS:
        if name in ("r", "lambda_b", "lambda_c", "sigma"):
            spec = _require(cb, name, "curves")
        else:
            spec = cb.get(name, 0.0)
        curve_kwargs[name] = _parse_curve(spec, mesh, f"curves.{name}")
    rec = cb.get("recoveries", {})
    if not isinstance(rec, dict):
        raise ConfigError("curves.recoveries must be an object")
    try:
        curves = MarketCurves(**curve_kwargs,
                              **{name: float(rec.get(name, 0.0)) for name in _RECOVERY_FIELDS})
    except ValueError as exc:
        raise ConfigError(f"curves: {exc}") from exc

    tb = _block(data, "trade")
    try:
        trade = TradeSpec(kind=_require(tb, "kind", "trade"),
                          strike=float(_require(tb, "strike", "trade")),
                          maturity=float(_require(tb, "maturity", "trade")),
                          sign=int(tb.get("sign", 1)))
    except ValueError as exc:
        raise ConfigError(f"trade: {exc}") from exc

    mb = _block(data, "margins")
    try:
        margins = MarginCapitalSpec(
            vm_fraction=float(_require(mb, "vm_fraction", "margins")),
            ib_rule=_parse_rule(_require(mb, "ib_rule", "margins"), "margins.ib_rule"),
            ic_rule=_parse_rule(_require(mb, "ic_rule", "margins"), "margins.ic_rule"),
            k_rule=_parse_rule(_require(mb, "k_rule", "margins"), "margins.k_rule"),
            phi=float(_require(mb, "phi", "margins")),
        )
    except ValueError as exc:
        raise ConfigError(f"margins: {exc}") from exc

    sb = _block(data, "strategy")
    try:
        strategy = HedgeStrategy(tag=_require(sb, "tag", "strategy"),
                                 issued_bond=int(sb.get("issued_bond", 2)))
    except ValueError as exc:
        raise ConfigError(f"strategy: {exc}") from exc

    eb = _block(data, "engine")
    if "seed" not in eb:
        raise ConfigError("engine.seed is mandatory; runs never seed from the clock")
    fp = eb.get("fixed_point", {})
    pdeb = eb.get("pde", {})
    hb = eb.get("hedge", {})
    scen = hb.get("scenario", {})
    try:
        r_ic = eb.get("r_ic")
        engine = EngineSettings(
            s0=float(_require(eb, "s0", "engine")),
            seed=int(eb["seed"]),
            n_paths=int(eb.get("n_paths", 10000)),
            n_steps=int(eb.get("n_steps", 100)),
            antithetic=bool(eb.get("antithetic", False)),
            quad_stride=int(eb.get("quad_stride", 1)),
            mode=eb.get("mode", "corrected"),
            r_ic=None if r_ic is None else _parse_curve(r_ic, mesh, "engine.r_ic"),
            fixed_point=FixedPointSettings(
                tolerance=None if fp.get("tolerance") is None else float(fp["tolerance"]),
                max_iterations=int(fp.get("max_iterations", 50)),
            ),
            pde=PdeGrid(
                s_max=float(pdeb.get("s_max", 500.0)),
                n_space=int(pdeb.get("n_space", 400)),
                n_time=int(pdeb.get("n_time", 400)),
                theta=float(pdeb.get("theta", 0.5)),
                spacing=pdeb.get("spacing", "uniform"),
                rannacher=bool(pdeb.get("rannacher", True)),
            ),
            hedge=HedgeSettings(
                n_paths=int(hb.get("n_paths", 8)),
                measure=hb.get("measure", "real-world"),
                scenario=DefaultScenario(
                    kind=scen.get("kind", "none"),
                    time=None if scen.get("time") is None else float(scen["time"]),
                    seed=None if scen.get("seed") is None else int(scen["seed"]),
                ),
                pde_refine=int(hb.get("pde_refine", 1)),
            ),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"engine: {exc}") from exc

    return RunConfig(curves=curves, trade=trade, margins=margins,
                     strategy=strategy, engine=engine)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
