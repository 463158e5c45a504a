"""Monte Carlo valuation-adjustment engine.

Computes the six adjustments as discounted time integrals of exposure
expectations over one shared path set:

    CVA   = -(1-R_C) int D lambda_C E[(V - X - I_C)+]
    DVA   = -(1-R_B) int D lambda_B E[(V - X + I_B)-]
    FCA   = -        int D lambda_B E[g_B + R_1 a_1 P_1 + R_2 a_2 P_2]
    ColVA = -        int D (r_X  - r - lambda_B) E[X]
    KVA   = -        int D (g_K  - r - lambda_B) E[phi K]
    MVA   = +        int D (r_IB - r - lambda_B) E[I_B]

with D(t,u) = exp(-int_t^u (r + lambda_B + lambda_C)). All integrals use the
trapezoidal rule on the shared quadrature mesh, evaluated pathwise first so
that reported values, standard errors and the total decompose consistently.

The FCA integrand references the future adjusted value V-hat = V + U through
the funding condition. That dependence is affine with deterministic
coefficient, so only the expected-adjustment profile h(u) = E_t[U(u, S_u)]
enters; h solves a Volterra-type fixed point handled by
:func:`fca_fixed_point` (no nested simulation). The zero-hedge-error
strategy and a single-bond strategy issuing a zero-recovery bond decouple
and finish in one iteration.

The legacy mode reproduces the uncorrected formulae for comparison: capital
funding without the phi fraction (E[K] in place of E[phi K]) and an
erroneous funding term for *received* initial margin,
-int D (r_IC - r - lambda_B) E[I_C], at a configurable rate r_IC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closeout import close_out_bank, close_out_cpty, funding_bond_values
from .contracts import MarginCapitalSpec, TradeSpec, profiles, risk_free_value
from .errors import FixedPointError
from .market import MarketCurves, PathGrid, PiecewiseConstantCurve, discount_factor
from .closeout import HedgeStrategy

__all__ = [
    "FixedPointSettings",
    "ExposureProfiles",
    "XvaBreakdown",
    "fca_fixed_point",
    "compute_xva",
    "compute_xva_legacy",
    "compute_xva_both",
]

TERMS = ("cva", "dva", "fca", "colva", "kva", "mva")


@dataclass(frozen=True)
class FixedPointSettings:
    """Controls for the implicit-FCA Picard iteration. ``tolerance`` is the
    max-abs change in the profile; None means 1e-8 times the notional scale
    max(1, S_0, strike)."""

    tolerance: float | None = None
    max_iterations: int = 50


@dataclass(eq=False)
class ExposureProfiles:
    """Per-node discounted-exposure inputs shared by all six integrals."""

    times: np.ndarray
    discount: np.ndarray        # D(t0, u)
    e_value: np.ndarray         # E[V]
    epe: np.ndarray             # E[(V - X - I_C)+]
    ene: np.ndarray             # E[(V - X + I_B)-]
    e_funding: np.ndarray       # E[g_B + R_1 a_1 P_1 + R_2 a_2 P_2] (converged)
    e_collateral: np.ndarray    # E[X]
    e_capital: np.ndarray       # E[K]
    e_im_posted: np.ndarray     # E[I_B]
    e_im_received: np.ndarray   # E[I_C]
    u_profile: np.ndarray       # h(u) = E_t[U(u, S_u)]


@dataclass(eq=False)
class XvaBreakdown:
    """The six adjustments, their Monte Carlo standard errors, and the total
    U (always the exact float sum of the six on the shared path set)."""

    cva: float
    dva: float
    fca: float
    colva: float
    kva: float
    mva: float
    cva_se: float
    dva_se: float
    fca_se: float
    colva_se: float
    kva_se: float
    mva_se: float
    total: float
    total_se: float
    mode: str
    strategy: str
    iterations: int
    n_paths: int
    profiles: ExposureProfiles = field(repr=False, default=None)  # type: ignore[assignment]

    def term(self, name: str) -> tuple[float, float]:
        return getattr(self, name), getattr(self, f"{name}_se")


def _trapz_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    w[0] = 0.5 * (times[1] - times[0])
    w[-1] = 0.5 * (times[-1] - times[-2])
    w[1:-1] = 0.5 * (times[2:] - times[:-2])
    return w


def _backward_discounted_integral(times: np.ndarray, discount: np.ndarray,
                                  g: np.ndarray) -> np.ndarray:
    """h(u_i) = int_{u_i}^T D(u_i, w) g(w) dw with trapezoids on the sub-mesh,
    using D(u, w) = D(t0, w) / D(t0, u)."""
    dg = discount * g
    cum = np.zeros_like(dg)
    steps = 0.5 * np.diff(times) * (dg[:-1] + dg[1:])
    cum[:-1] = steps[::-1].cumsum()[::-1]
    return cum / discount


def fca_fixed_point(times, discount, integrand, initial=None, coupled=True,
                    tolerance=1e-8, max_iterations=50):
    """Picard iteration for the expected-adjustment profile h(u) = E_t[U(u, S_u)].

    ``integrand(h)`` returns per-node values G(w) such that
    U(u) = int_u^T D(u, w) G(w) dw. When ``coupled`` is False the integrand is
    h-free and a single evaluation is exact (one iteration). Otherwise
    iterate until the max-abs change is below ``tolerance`` or raise
    :class:`FixedPointError` carrying the change trace.
    """
    times = np.asarray(times, dtype=float)
    discount = np.asarray(discount, dtype=float)
    h = np.zeros_like(times) if initial is None else np.asarray(initial, dtype=float).copy()
    trace: list[float] = []
    for iteration in range(1, max_iterations + 1):
        h_new = _backward_discounted_integral(times, discount, np.asarray(integrand(h)))
        change = float(np.max(np.abs(h_new - h)))
        trace.append(change)
        h = h_new
        if not coupled:
            return h, 1
        if change <= tolerance:
            return h, iteration
    raise FixedPointError(
        f"implicit FCA fixed point did not converge in {max_iterations} "
        f"iterations (last change {trace[-1]:.3e}, tolerance {tolerance:.3e})",
        trace,
    )


class _NodeData:
    """Pathwise exposure slices at one quadrature node."""

    __slots__ = ("v", "x", "i_b", "i_c", "k", "g_b")

    def __init__(self, v, margins: MarginCapitalSpec, curves: MarketCurves):
        self.v = v
        prof = profiles(margins, v)
        self.x, self.i_b, self.i_c, self.k = prof.x, prof.i_b, prof.i_c, prof.k
        self.g_b = close_out_bank(v, self.x, self.i_b, curves.rb)


def _validate_inputs(curves, trade, paths, quad_times, mode):
    if paths.measure != "pricing":
        raise ValueError("XVA integrals require pricing-measure paths")
    path_times = paths.times
    if quad_times is None:
        quad_times = path_times
        idx = np.arange(len(path_times))
    else:
        quad_times = np.asarray(quad_times, dtype=float)
        idx = np.searchsorted(path_times, quad_times)
        idx = np.clip(idx, 0, len(path_times) - 1)
        # snap to the nearest mesh node and insist it matches
        left_ok = idx > 0
        better_left = left_ok & (np.abs(path_times[np.maximum(idx - 1, 0)] - quad_times)
                                 < np.abs(path_times[idx] - quad_times))
        idx = np.where(better_left, idx - 1, idx)
        if np.any(np.abs(path_times[idx] - quad_times) > 1e-12):
            raise ValueError("quadrature mesh must be a subset of the path mesh")
    if len(quad_times) < 2:
        raise ValueError("quadrature mesh needs at least 2 nodes")
    if abs(quad_times[-1] - trade.maturity) > 1e-9:
        raise ValueError("quadrature mesh must end at the trade maturity")
    if mode != "legacy":
        # the pricing representation assumes the counterparty-bond repo rate
        # equals the risk-free rate
        for u in quad_times:
            r, qc = curves.r(u), curves.q_c(u)
            if abs(qc - r) > 1e-12 * (1.0 + abs(r)):
                raise ValueError(
                    f"corrected-mode run requires q_C = r; at t={u} got "
                    f"q_C={qc}, r={r}"
                )
    return quad_times, idx


def _compute(curves: MarketCurves, trade: TradeSpec, margins: MarginCapitalSpec,
             strategy: HedgeStrategy, paths: PathGrid, quad_times, fixed_point,
             r_ic, mode: str):
    want_legacy = mode != "corrected"
    quad, idx = _validate_inputs(curves, trade, paths, quad_times, mode)
    n_quad = len(quad)
    n_paths = paths.n_paths
    t0 = float(paths.times[0])
    phi = margins.phi
    coupling = strategy.recovery_coupling(curves)  # raises if unsolvable

    disc = np.array([discount_factor(curves, t0, float(u)) for u in quad])
    lam_b = np.array([curves.lambda_b(float(u)) for u in quad])
    lam_c = np.array([curves.lambda_c(float(u)) for u in quad])
    r_at = np.array([curves.r(float(u)) for u in quad])
    colva_f = np.array([curves.r_x(float(u)) for u in quad]) - r_at - lam_b
    kva_f = np.array([curves.gamma_k(float(u)) for u in quad]) - r_at - lam_b
    mva_f = np.array([curves.r_ib(float(u)) for u in quad]) - r_at - lam_b
    if r_ic is None:
        r_ic = curves.r_ib
    else:
        r_ic = PiecewiseConstantCurve.coerce(r_ic)
    ric_f = np.array([r_ic(float(u)) for u in quad]) - r_at - lam_b

    nodes = [_NodeData(risk_free_value(trade, curves, float(u), paths.spots[:, j]),
                       margins, curves)
             for u, j in zip(quad, idx)]

    e_value = np.array([nd.v.mean() for nd in nodes])
    epe = np.array([np.maximum(nd.v - nd.x - nd.i_c, 0.0).mean() for nd in nodes])
    ene = np.array([np.minimum(nd.v - nd.x + nd.i_b, 0.0).mean() for nd in nodes])
    e_gb = np.array([nd.g_b.mean() for nd in nodes])
    e_x = np.array([np.mean(nd.x) if np.ndim(nd.x) else float(nd.x) for nd in nodes])
    e_k = np.array([np.mean(nd.k) if np.ndim(nd.k) else float(nd.k) for nd in nodes])
    e_ib = np.array([np.mean(nd.i_b) if np.ndim(nd.i_b) else float(nd.i_b) for nd in nodes])
    e_ic = np.array([np.mean(nd.i_c) if np.ndim(nd.i_c) else float(nd.i_c) for nd in nodes])

    def mean_funding(h: np.ndarray) -> np.ndarray:
        # funding_bond_values is linear in its exposure arguments, so it maps
        # node means to the mean bond values exactly
        out = np.empty(n_quad)
        for m in range(n_quad):
            a1, a2 = funding_bond_values(e_value[m] + h[m], e_gb[m], e_x[m],
                                         e_ib[m], phi * e_k[m], curves, strategy)
            out[m] = e_gb[m] + curves.r1 * a1 + curves.r2 * a2
        return out

    def integrand(h: np.ndarray) -> np.ndarray:
        return (
            -(1.0 - curves.rc) * lam_c * epe
            - (1.0 - curves.rb) * lam_b * ene
            - lam_b * mean_funding(h)
            - colva_f * e_x
            - kva_f * phi * e_k
            + mva_f * e_ib
        )

    scale = max(1.0, trade.strike, float(paths.spots[0, 0]))
    tol = fixed_point.tolerance if fixed_point.tolerance is not None else 1e-8 * scale
    h, iterations = fca_fixed_point(
        quad, disc, integrand, coupled=coupling != 0.0, tolerance=tol,
        max_iterations=fixed_point.max_iterations,
    )

    # pathwise trapezoidal integrals per term (KVA accumulated without phi so
    # both modes scale the same base integral)
    weights = _trapz_weights(quad)
    acc = {name: np.zeros(n_paths) for name in
           ("cva", "dva", "fca", "colva", "kva_base", "mva", "ic_extra")}
    e_funding = np.empty(n_quad)
    for m, nd in enumerate(nodes):
        wd = weights[m] * disc[m]
        a1, a2 = funding_bond_values(nd.v + h[m], nd.g_b, nd.x, nd.i_b,
                                     phi * nd.k, curves, strategy)
        fund = nd.g_b + curves.r1 * a1 + curves.r2 * a2
        e_funding[m] = np.mean(fund)
        acc["cva"] += wd * (-(1.0 - curves.rc) * lam_c[m]) * np.maximum(nd.v - nd.x - nd.i_c, 0.0)
        acc["dva"] += wd * (-(1.0 - curves.rb) * lam_b[m]) * np.minimum(nd.v - nd.x + nd.i_b, 0.0)
        acc["fca"] += wd * (-lam_b[m]) * fund
        acc["colva"] += wd * (-colva_f[m]) * nd.x
        acc["kva_base"] += wd * (-kva_f[m]) * nd.k
        acc["mva"] += wd * mva_f[m] * nd.i_b
        acc["ic_extra"] += wd * (-ric_f[m]) * nd.i_c

    def stat(samples: np.ndarray) -> tuple[float, float]:
        value = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
        return value, se

    prof = ExposureProfiles(
        times=quad.copy(), discount=disc, e_value=e_value, epe=epe, ene=ene,
        e_funding=e_funding, e_collateral=e_x, e_capital=e_k, e_im_posted=e_ib,
        e_im_received=e_ic, u_profile=h,
    )

    cva, cva_se = stat(acc["cva"])
    dva, dva_se = stat(acc["dva"])
    fca, fca_se = stat(acc["fca"])
    colva, colva_se = stat(acc["colva"])
    kva_base, kva_base_se = stat(acc["kva_base"])
    mva, mva_se = stat(acc["mva"])

    kva = phi * kva_base
    corrected = XvaBreakdown(
        cva=cva, dva=dva, fca=fca, colva=colva, kva=kva, mva=mva,
        cva_se=cva_se, dva_se=dva_se, fca_se=fca_se, colva_se=colva_se,
        kva_se=phi * kva_base_se, mva_se=mva_se,
        total=cva + dva + fca + colva + kva + mva,
        total_se=stat(acc["cva"] + acc["dva"] + acc["fca"] + acc["colva"]
                      + phi * acc["kva_base"] + acc["mva"])[1],
        mode="corrected", strategy=strategy.label, iterations=iterations,
        n_paths=n_paths, profiles=prof,
    )
    if not want_legacy:
        return corrected, None

    # legacy deviations only: KVA drops the phi fraction, MVA adds the
    # received-margin funding term; the other four terms are shared
    extra, _ = stat(acc["ic_extra"])
    mva_legacy = mva + extra
    mva_legacy_se = stat(acc["mva"] + acc["ic_extra"])[1]
    legacy = XvaBreakdown(
        cva=cva, dva=dva, fca=fca, colva=colva, kva=kva_base, mva=mva_legacy,
        cva_se=cva_se, dva_se=dva_se, fca_se=fca_se, colva_se=colva_se,
        kva_se=kva_base_se, mva_se=mva_legacy_se,
        total=cva + dva + fca + colva + kva_base + mva_legacy,
        total_se=stat(acc["cva"] + acc["dva"] + acc["fca"] + acc["colva"]
                      + acc["kva_base"] + acc["mva"] + acc["ic_extra"])[1],
        mode="legacy", strategy=strategy.label, iterations=iterations,
        n_paths=n_paths, profiles=prof,
    )
    return corrected, legacy


def compute_xva(curves: MarketCurves, trade: TradeSpec, margins: MarginCapitalSpec,
                strategy: HedgeStrategy, paths: PathGrid, quad_times=None,
                fixed_point: FixedPointSettings = FixedPointSettings()) -> XvaBreakdown:
    """Corrected six-term XVA breakdown on the given path set."""
    corrected, _ = _compute(curves, trade, margins, strategy, paths, quad_times,
                            fixed_point, None, mode="corrected")
    return corrected


def compute_xva_legacy(curves: MarketCurves, trade: TradeSpec,
                       margins: MarginCapitalSpec, strategy: HedgeStrategy,
                       paths: PathGrid, quad_times=None,
                       fixed_point: FixedPointSettings = FixedPointSettings(),
                       r_ic=None) -> XvaBreakdown:
    """Breakdown under the uncorrected legacy formulae (same path set).

    ``r_ic`` is the rate credited on received initial margin in the
    erroneous legacy term; defaults to the posted-margin rate curve.
    """
    _, legacy = _compute(curves, trade, margins, strategy, paths, quad_times,
                         fixed_point, r_ic, mode="legacy")
    return legacy


def compute_xva_both(curves: MarketCurves, trade: TradeSpec,
                     margins: MarginCapitalSpec, strategy: HedgeStrategy,
                     paths: PathGrid, quad_times=None,
                     fixed_point: FixedPointSettings = FixedPointSettings(),
                     r_ic=None) -> tuple[XvaBreakdown, XvaBreakdown]:
    """Corrected and legacy breakdowns sharing one path set and seed, so the
    per-term differences are noise-free."""
    return _compute(curves, trade, margins, strategy, paths, quad_times,
                    fixed_point, r_ic, mode="both")
