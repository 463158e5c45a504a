"""Independent numerical oracles used by the tests.

Everything here is built from 1-D Gauss-Legendre quadrature against the
lognormal terminal density; none of it shares code with the engine's Monte
Carlo, fixed-point, or finite-difference paths, so disagreement means a bug
on the engine side (or a broken oracle, which the frozen reference values
in the tests guard against).
"""

from __future__ import annotations

import math

import numpy as np

# z-range covering the standard normal to ~1e-22 tail mass
_Z_LIMIT = 10.0


def gauss_legendre(lo: float, hi: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def forward_epe(s0: float, strike: float, r: float, sigma: float, u: float,
                maturity: float, carry: float | None = None, sign: int = 1,
                n_quad: int = 400) -> float:
    """E[(V(u, S_u))+] for a forward under lognormal dynamics.

    The spot drifts at the carry rate (q_S - gamma_S; defaults to r, the
    standard repo-at-risk-free market), and the forward's risk-free value is
    V(u, S) = S e^{(carry - r)(T-u)} - K e^{-r (T-u)}. The positive part is
    integrated against the normal density by Gauss-Legendre, split at the
    payoff kink so the quadrature sees only a smooth integrand.
    """
    if carry is None:
        carry = r
    tau = maturity - u
    growth = math.exp((carry - r) * tau)
    k_disc = strike * math.exp(-r * tau)
    if u <= 0.0 or sigma == 0.0:
        return max(sign * (s0 * math.exp(carry * u) * growth - k_disc), 0.0)
    sd = sigma * math.sqrt(u)
    mean_log = (carry - 0.5 * sigma * sigma) * u
    # V > 0 iff S_u > K e^{-carry tau}; the kink in z:
    z_star = (math.log(k_disc / (s0 * growth)) - mean_log) / sd
    if sign > 0:
        lo, hi = min(z_star, _Z_LIMIT), _Z_LIMIT
    else:
        lo, hi = -_Z_LIMIT, max(z_star, -_Z_LIMIT)
    if hi <= lo:
        return 0.0
    z, w = gauss_legendre(lo, hi, n_quad)
    s_u = s0 * np.exp(mean_log + sd * z)
    payoff = sign * (s_u * growth - k_disc)
    density = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(np.sum(w * payoff * density))


def cva_forward(s0: float, strike: float, r: float, lambda_c: float, rc: float,
                sigma: float, maturity: float, carry: float | None = None,
                sign: int = 1, n_time: int = 200, n_space: int = 400) -> float:
    """Semi-analytic CVA of the uncollateralized forward:
    -(1 - R_C) lambda_C int_0^T e^{-(r + lambda_C) u} EPE(u) du
    (lambda_B = 0, so the discount carries only r + lambda_C)."""
    u, w = gauss_legendre(0.0, maturity, n_time)
    epe = np.array([forward_epe(s0, strike, r, sigma, ui, maturity, carry, sign, n_space)
                    for ui in u])
    disc = np.exp(-(r + lambda_c) * u)
    return float(-(1.0 - rc) * lambda_c * np.sum(w * disc * epe))


def profile_integral(times, discount, factor, profile) -> float:
    """Trapezoidal int D(u) factor(u) profile(u) du; used to recompute single
    adjustment terms independently from exported exposure profiles."""
    times = np.asarray(times, dtype=float)
    integrand = np.asarray(discount) * np.asarray(factor) * np.asarray(profile)
    return float(np.sum(0.5 * np.diff(times) * (integrand[:-1] + integrand[1:])))
