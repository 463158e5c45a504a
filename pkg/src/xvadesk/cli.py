"""Command-line entry point: ``xva mc|pde|hedge|compare --config <file>``.

Every run writes its artifacts plus an ``effective_config.json`` that
reparses to the exact configuration used (including any --seed override).
All numeric output is serialized with 17 significant digits, so reruns are
byte-identical and doubles round-trip losslessly.

Exit codes: 0 success, 2 validation failure, 3 numerical failure. Failures
also print a one-line machine-readable JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, GridError, NumericalError, XvaError
from .hedge import simulate_hedges
from .market import simulate_paths
from .mc import TERMS, XvaBreakdown, compute_xva_both
from .pde import pde_value_with_error, solve_pde

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            raise NumericalError(f"non-finite value {x} in output")
        return format(x, ".17g")
    raise TypeError(f"unsupported scalar {type(x)!r}")


def _dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dumps(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{_dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _fmt(obj)


def _write_json(path: Path, obj) -> None:
    path.write_text(_dumps(obj) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(x if isinstance(x, str) else _fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _breakdown_dict(b: XvaBreakdown) -> dict:
    out = {}
    for name in TERMS:
        value, se = b.term(name)
        out[name] = {"value": value, "standard_error": se}
    out["total"] = {"value": b.total, "standard_error": b.total_se}
    out["mode"] = b.mode
    out["strategy"] = b.strategy
    out["iterations"] = b.iterations
    out["n_paths"] = b.n_paths
    return out


def _emit_effective_config(cfg: RunConfig, out: Path) -> None:
    _write_json(out / "effective_config.json", cfg.to_dict())


def _run_engine(cfg: RunConfig, workers: int):
    paths = simulate_paths(cfg.curves, cfg.engine.s0, cfg.path_times(),
                           cfg.engine.n_paths, cfg.engine.seed, "pricing",
                           cfg.engine.antithetic, workers)
    return compute_xva_both(cfg.curves, cfg.trade, cfg.margins, cfg.strategy,
                            paths, cfg.quad_times(), cfg.engine.fixed_point,
                            cfg.engine.r_ic)


def _cmd_mc(cfg: RunConfig, out: Path, args) -> int:
    corrected, legacy = _run_engine(cfg, args.workers)
    payload = {}
    if cfg.engine.mode in ("corrected", "both"):
        payload["corrected"] = _breakdown_dict(corrected)
    if cfg.engine.mode in ("legacy", "both"):
        payload["legacy"] = _breakdown_dict(legacy)
    _write_json(out / "breakdown.json", payload)
    p = corrected.profiles
    _write_csv(
        out / "exposure_profiles.csv",
        ["time", "discount", "e_value", "epe", "ene", "e_funding",
         "e_collateral", "e_capital", "e_im_posted", "e_im_received", "u_profile"],
        zip(p.times, p.discount, p.e_value, p.epe, p.ene, p.e_funding,
            p.e_collateral, p.e_capital, p.e_im_posted, p.e_im_received,
            p.u_profile),
    )
    _emit_effective_config(cfg, out)
    shown = corrected if cfg.engine.mode != "legacy" else legacy
    print(f"U = {_fmt(shown.total)} +/- {_fmt(shown.total_se)} "
          f"({shown.mode}, {shown.strategy}, {shown.iterations} iteration(s))")
    return 0


def _cmd_pde(cfg: RunConfig, out: Path, args) -> int:
    value, err = pde_value_with_error(cfg.curves, cfg.trade, cfg.margins,
                                      cfg.strategy, cfg.engine.pde, cfg.engine.s0)
    grid = cfg.engine.pde
    _write_json(out / "pde.json", {
        "u0": value,
        "richardson_error_estimate": err,
        "s0": cfg.engine.s0,
        "grid": {"s_max": grid.s_max, "n_space": grid.n_space,
                 "n_time": grid.n_time, "theta": grid.theta,
                 "spacing": grid.spacing, "rannacher": grid.rannacher},
    })
    if args.surface:
        solution = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy, grid)
        rows = ((t, s, solution.u[i, j])
                for i, t in enumerate(solution.times)
                for j, s in enumerate(solution.s_nodes))
        _write_csv(out / "surface.csv", ["time", "spot", "u"], rows)
    _emit_effective_config(cfg, out)
    print(f"U_PDE(t0, S0) = {_fmt(value)} (Richardson error estimate {_fmt(err)})")
    return 0


def _cmd_hedge(cfg: RunConfig, out: Path, args) -> int:
    hedge = cfg.engine.hedge
    path_times = cfg.path_times()
    if hedge.pde_refine > 1:
        fine = [path_times[0]]
        for a, b in zip(path_times, path_times[1:]):
            fine.extend(np.linspace(a, b, hedge.pde_refine + 1)[1:])
        surface_times = np.array(fine)
    else:
        surface_times = path_times
    surface = solve_pde(cfg.curves, cfg.trade, cfg.margins, cfg.strategy,
                        cfg.engine.pde, times=surface_times)
    paths = simulate_paths(cfg.curves, cfg.engine.s0, path_times, hedge.n_paths,
                           cfg.engine.seed, hedge.measure, workers=args.workers)
    ledgers = simulate_hedges(paths, cfg.curves, cfg.trade, cfg.margins,
                              cfg.strategy, surface, hedge.scenario)
    rows = []
    for j, led in enumerate(ledgers):
        rows.append([
            j, len(led.times) - 1, led.cumulative_leak, led.max_abs_cumulative_leak,
            float(np.max(np.abs(led.leaks))) if len(led.leaks) else 0.0,
            float(np.max(np.abs(led.funding_residuals))),
            float(np.max(np.abs(led.beta_residuals))),
            led.default_kind,
            "" if led.default_time is None else _fmt(led.default_time),
            "" if led.realized_jump is None else _fmt(led.realized_jump),
            "" if led.expected_jump is None else _fmt(led.expected_jump),
        ])
    _write_csv(
        out / "hedge_stats.csv",
        ["path", "n_steps", "cumulative_leak", "max_abs_cumulative_leak",
         "max_abs_step_leak", "max_funding_residual", "max_beta_residual",
         "default_kind", "default_time", "realized_jump", "expected_jump"],
        rows,
    )
    _emit_effective_config(cfg, out)
    mean_leak = float(np.mean([led.cumulative_leak for led in ledgers]))
    print(f"{len(ledgers)} ledger path(s), mean cumulative leak {_fmt(mean_leak)}")
    return 0


def _cmd_compare(cfg: RunConfig, out: Path, args) -> int:
    corrected, legacy = _run_engine(cfg, args.workers)
    table = {}
    for name in TERMS:
        cv, lv = getattr(corrected, name), getattr(legacy, name)
        table[name] = {"corrected": cv, "legacy": lv, "delta": cv - lv}
    table["total"] = {"corrected": corrected.total, "legacy": legacy.total,
                      "delta": corrected.total - legacy.total}
    _write_json(out / "compare.json", {
        "seed": cfg.engine.seed,
        "strategy": corrected.strategy,
        "terms": table,
    })
    _emit_effective_config(cfg, out)
    print(f"corrected - legacy: KVA {_fmt(table['kva']['delta'])}, "
          f"MVA {_fmt(table['mva']['delta'])}")
    return 0


_COMMANDS = {"mc": _cmd_mc, "pde": _cmd_pde, "hedge": _cmd_hedge,
             "compare": _cmd_compare}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xva",
        description="Valuation-adjustment runs: Monte Carlo, PDE cross-check, "
                    "hedge ledger, corrected-vs-legacy comparison.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("mc", "Monte Carlo XVA breakdown and exposure profiles"),
        ("pde", "finite-difference solve of the adjustment PDE"),
        ("hedge", "pathwise hedge-ledger simulation"),
        ("compare", "corrected vs legacy on one seed, per-term deltas"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override engine.seed")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads for path generation (output-invariant)")
        if name == "pde":
            p.add_argument("--surface", action="store_true",
                           help="also dump the full U surface as CSV")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args)
    except (ConfigError, GridError, ValueError) as exc:
        _report_error("validation", exc)
        return 2
    except (NumericalError, XvaError) as exc:
        _report_error("numerical", exc)
        return 3


def _report_error(kind: str, exc: Exception) -> None:
    record = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
