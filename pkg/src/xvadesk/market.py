"""Market data: term-structure curves, bond yields, discounting, GBM paths.

Conventions used throughout the package:

- Times are year fractions from the valuation date (t = 0).
- All curves are piecewise-constant and right-continuous on their own knot
  mesh; integrals over [t, u] are computed in closed form segment by segment,
  so there is no quadrature error in discount factors or drift integrals.
- Rates are annualized and continuously compounded; volatility is per sqrt(year).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PiecewiseConstantCurve",
    "MarketCurves",
    "PathGrid",
    "bond_yields",
    "discount_factor",
    "simulate_paths",
]


class PiecewiseConstantCurve:
    """A right-continuous step function of time with exact integration.

    ``value(t) == values[i]`` for ``knots[i] <= t < knots[i+1]`` and
    ``values[-1]`` for ``t >= knots[-1]``. Knots must start at 0 and be
    strictly increasing.
    """

    __slots__ = ("knots", "values")

    def __init__(self, knots, values):
        knots = tuple(float(k) for k in knots)
        values = tuple(float(v) for v in values)
        if not knots or knots[0] != 0.0:
            raise ValueError("curve knots must start at 0.0")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("curve knots must be strictly increasing")
        if len(values) != len(knots):
            raise ValueError("curve needs one value per knot")
        if any(not math.isfinite(v) for v in values):
            raise ValueError("curve values must be finite")
        self.knots = knots
        self.values = values

    @classmethod
    def flat(cls, value: float) -> "PiecewiseConstantCurve":
        return cls((0.0,), (value,))

    @classmethod
    def coerce(cls, spec) -> "PiecewiseConstantCurve":
        """Accept an existing curve, a bare number (flat), or (knots, values)."""
        if isinstance(spec, cls):
            return spec
        if isinstance(spec, (int, float)):
            return cls.flat(float(spec))
        knots, values = spec
        return cls(knots, values)

    def __call__(self, t: float) -> float:
        if t < 0.0:
            raise ValueError(f"curve evaluated at negative time {t}")
        # bisect over a short tuple; curves have few knots
        i = len(self.knots) - 1
        while i > 0 and self.knots[i] > t:
            i -= 1
        return self.values[i]

    def integral(self, t: float, u: float) -> float:
        """Exact integral of the step function over [t, u]; requires t <= u."""
        if u < t:
            raise ValueError(f"integral requires t <= u, got t={t}, u={u}")
        total = 0.0
        for i, v in enumerate(self.values):
            lo = max(t, self.knots[i])
            hi = u if i + 1 == len(self.knots) else min(u, self.knots[i + 1])
            if hi > lo:
                total += v * (hi - lo)
        return total

    def min_value(self) -> float:
        return min(self.values)

    def is_flat(self) -> bool:
        return len(set(self.values)) == 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PiecewiseConstantCurve)
            and self.knots == other.knots
            and self.values == other.values
        )

    def __repr__(self) -> str:
        if len(self.values) == 1:
            return f"PiecewiseConstantCurve.flat({self.values[0]!r})"
        return f"PiecewiseConstantCurve({self.knots!r}, {self.values!r})"


def _curve(spec) -> PiecewiseConstantCurve:
    return PiecewiseConstantCurve.coerce(spec)


@dataclass(frozen=True)
class MarketCurves:
    """Deterministic term structures plus the recovery constants.

    Curve fields accept a float (flat curve), a (knots, values) pair, or a
    :class:`PiecewiseConstantCurve`. ``mu`` is the real-world drift and is
    only used when simulating hedge-ledger paths; pricing never touches it.
    """

    r: PiecewiseConstantCurve
    lambda_b: PiecewiseConstantCurve
    lambda_c: PiecewiseConstantCurve
    sigma: PiecewiseConstantCurve
    gamma_s: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    q_s: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    q_c: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    r_x: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    gamma_k: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    r_ib: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    mu: PiecewiseConstantCurve = field(default=0.0)  # type: ignore[assignment]
    r1: float = 0.0
    r2: float = 0.0
    rb: float = 0.0
    rc: float = 0.0

    def __post_init__(self):
        for name in ("r", "lambda_b", "lambda_c", "sigma", "gamma_s", "q_s",
                     "q_c", "r_x", "gamma_k", "r_ib", "mu"):
            object.__setattr__(self, name, _curve(getattr(self, name)))
        for name in ("r1", "r2", "rb", "rc"):
            rec = float(getattr(self, name))
            if not 0.0 <= rec <= 1.0:
                raise ValueError(f"recovery {name}={rec} outside [0, 1]")
            object.__setattr__(self, name, rec)
        if self.lambda_b.min_value() < 0.0:
            raise ValueError("lambda_b must be non-negative")
        if self.lambda_c.min_value() < 0.0:
            raise ValueError("lambda_c must be non-negative")
        if self.sigma.min_value() < 0.0:
            raise ValueError("sigma must be non-negative")


def bond_yields(curves: MarketCurves, t: float) -> tuple[float, float, float]:
    """Yields (r_1, r_2, r_C) on the two own bonds and the counterparty bond.

    r_i = r + (1 - R_i) * lambda_B for the own bonds of each seniority;
    r_C = r + lambda_C for the zero-recovery counterparty bond.
    """
    r = curves.r(t)
    lb = curves.lambda_b(t)
    return (
        r + (1.0 - curves.r1) * lb,
        r + (1.0 - curves.r2) * lb,
        r + curves.lambda_c(t),
    )


def hazard_discount_integral(curves: MarketCurves, t: float, u: float) -> float:
    """Exact integral of r + lambda_B + lambda_C over [t, u]."""
    return (
        curves.r.integral(t, u)
        + curves.lambda_b.integral(t, u)
        + curves.lambda_c.integral(t, u)
    )


def discount_factor(curves: MarketCurves, t: float, u: float) -> float:
    """Default-risky discount factor D(t, u) = exp(-int_t^u (r+lambda_B+lambda_C))."""
    if u < t:
        raise ValueError(f"discount_factor requires t <= u, got t={t}, u={u}")
    return math.exp(-hazard_discount_integral(curves, t, u))


@dataclass(eq=False)
class PathGrid:
    """Simulated asset paths on a fixed time mesh.

    ``spots[j, m]`` is the price of path ``j`` at ``times[m]``. Regeneration
    with the same (seed, n_paths, mesh, measure, antithetic) inputs is
    bit-exact regardless of the worker count used to fill the array.
    """

    times: np.ndarray
    spots: np.ndarray
    seed: int
    measure: str
    antithetic: bool = False

    @property
    def n_paths(self) -> int:
        return self.spots.shape[0]

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def _path_generator(seed: int, stream: int) -> np.random.Generator:
    # 128-bit Philox key: seed in the high word, stream index in the low word.
    # Counter-based, so streams are independent and order-free.
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(stream)))


def simulate_paths(
    curves: MarketCurves,
    s0: float,
    times,
    n_paths: int,
    seed: int,
    measure: str = "pricing",
    antithetic: bool = False,
    workers: int = 1,
) -> PathGrid:
    """Generate GBM paths by exact log-Euler stepping.

    Per step, log S picks up the exact drift integral int (a - sigma^2/2) dv
    and a Gaussian increment with variance int sigma^2 dv, where a = q_S -
    gamma_S under the pricing measure and a = mu under the real-world one.
    With piecewise-constant curves this sampling is distribution-exact: the
    only approximation anywhere downstream is the time quadrature, never the
    paths themselves.

    Normals for path j come from a dedicated counter-based stream keyed by
    (seed, j) (by (seed, j // 2) with a sign flip on odd paths when
    ``antithetic``), so serial and multi-worker runs agree bit-exactly.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0.0):
        raise ValueError("time mesh must be strictly increasing with >= 2 nodes")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if s0 <= 0.0:
        raise ValueError("s0 must be positive")
    if measure == "pricing":
        drift_int = lambda a, b: curves.q_s.integral(a, b) - curves.gamma_s.integral(a, b)
    elif measure == "real-world":
        drift_int = lambda a, b: curves.mu.integral(a, b)
    else:
        raise ValueError(f"unknown measure {measure!r}")

    n_steps = len(times) - 1
    var_curve = PiecewiseConstantCurve(curves.sigma.knots,
                                       tuple(v * v for v in curves.sigma.values))
    log_drift = np.array(
        [drift_int(times[m], times[m + 1]) - 0.5 * var_curve.integral(times[m], times[m + 1])
         for m in range(n_steps)]
    )
    vol = np.sqrt([var_curve.integral(times[m], times[m + 1]) for m in range(n_steps)])

    z = np.empty((n_paths, n_steps))

    def fill(j0: int, j1: int) -> None:
        for j in range(j0, j1):
            stream = j // 2 if antithetic else j
            draw = _path_generator(seed, stream).standard_normal(n_steps)
            z[j, :] = -draw if (antithetic and j % 2 == 1) else draw

    if workers <= 1 or n_paths < 2 * workers:
        fill(0, n_paths)
    else:
        chunk = -(-n_paths // workers)
        bounds = [(k * chunk, min((k + 1) * chunk, n_paths)) for k in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: fill(*b), [b for b in bounds if b[0] < b[1]]))

    log_s = np.cumsum(log_drift[None, :] + vol[None, :] * z, axis=1)
    spots = np.empty((n_paths, n_steps + 1))
    spots[:, 0] = s0
    spots[:, 1:] = s0 * np.exp(log_s)
    return PathGrid(times=times, spots=spots, seed=int(seed), measure=measure,
                    antithetic=antithetic)
