"""Riemann--Liouville fractional integrals and derivatives on uniform grids.

Integrals use product integration: the kernel ``(t-s)^{alpha-1}`` is integrated
exactly against the piecewise-linear interpolant of the samples, so the rule
is exact for piecewise-linear data.  Derivatives differentiate the
product-integration result numerically (second-order centred differences,
second-order one-sided stencils at the ends).

Samples may be batched; the time axis is axis 0 for 1-D arrays and axis -2
otherwise, matching the ``(n_paths, n_nodes, d)`` path layout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal, special

from .fbm_core import TimeGrid

__all__ = [
    "SampledFunction",
    "frac_integral",
    "frac_derivative",
    "frac_op_negative",
    "semigroup_check",
    "SemigroupReport",
    "empirical_holder_exponent",
]


def _time_axis(x: np.ndarray) -> int:
    return 0 if x.ndim == 1 else x.ndim - 2


@dataclass
class SampledFunction:
    """Samples of a function on a uniform grid."""

    grid: TimeGrid
    values: np.ndarray
    zero_at_origin: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        ax = _time_axis(self.values)
        if self.values.shape[ax] != self.grid.n_nodes:
            raise ValueError("values do not match the grid")
        if self.zero_at_origin:
            v0 = np.take(self.values, 0, axis=ax)
            if np.any(np.abs(v0) > 1e-12 * max(1.0, float(np.max(np.abs(self.values))))):
                raise ValueError("zero_at_origin set but values[0] != 0")

    @classmethod
    def from_callable(cls, fn, grid: TimeGrid) -> "SampledFunction":
        return cls(grid, fn(grid.nodes))

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction(self.grid, values)


def _along(fn, values: np.ndarray) -> np.ndarray:
    ax = _time_axis(values)
    out = fn(np.moveaxis(values, ax, 0))
    return np.moveaxis(out, 0, ax)


def _conv_causal(x: np.ndarray, ker: np.ndarray) -> np.ndarray:
    """``out[n] = sum_{j<=n} ker[n-j] x[j]`` along axis 0."""
    n = x.shape[0]
    shape = (n,) + (1,) * (x.ndim - 1)
    return signal.fftconvolve(x, ker[:n].reshape(shape), mode="full", axes=0)[:n]


def _rl_integral(x: np.ndarray, dt: float, alpha: float) -> np.ndarray:
    """Product-trapezoid Riemann--Liouville integral along axis 0 (alpha > 0)."""
    n = x.shape[0] - 1
    m = np.arange(n + 1, dtype=float)
    a1 = alpha + 1.0
    c = np.empty(n + 1)
    c[0] = 1.0
    if n >= 1:
        mm = m[1:]
        c[1:] = (mm + 1) ** a1 - 2 * mm**a1 + (mm - 1) ** a1
    # weight of f_0 at node k: (k-1)^{a+1} - (k-a-1) k^a
    w0 = np.zeros(n + 1)
    if n >= 1:
        k = m[1:]
        w0[1:] = (k - 1) ** a1 - (k - a1) * k**alpha
    inner = np.zeros_like(x)
    inner[1:] = _conv_causal(x[1:], c)
    bshape = (n + 1,) + (1,) * (x.ndim - 1)
    out = inner + w0.reshape(bshape) * x[0:1]
    out *= dt**alpha / special.gamma(alpha + 2.0)
    out[0] = 0.0
    return out


def _increment_integral(x: np.ndarray, dt: float, alpha: float) -> np.ndarray:
    """``Gamma(alpha+1)^{-1} int_0^t (t-s)^alpha df_s`` for piecewise-linear f (alpha > -1)."""
    n = x.shape[0] - 1
    dx = np.diff(x, axis=0)
    m = np.arange(1, n + 1, dtype=float)
    a1 = alpha + 1.0
    ker = m**a1 - (m - 1) ** a1  # cell at lag m
    out = np.zeros_like(x)
    out[1:] = _conv_causal(dx, ker)
    return out * dt**alpha / special.gamma(alpha + 2.0)


def _ddt(x: np.ndarray, dt: float) -> np.ndarray:
    if x.shape[0] < 3:
        return np.gradient(x, dt, axis=0, edge_order=1)
    return np.gradient(x, dt, axis=0, edge_order=2)


def frac_integral(f: SampledFunction, alpha: float) -> SampledFunction:
    """Fractional integral of order ``alpha`` in [0, 1).

    ``alpha = 0`` returns ``f`` unchanged.
    """
    if alpha == 0:
        return f.with_values(f.values.copy())
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}; use frac_op_negative for negative orders")
    return f.with_values(_along(lambda x: _rl_integral(x, f.grid.dt, alpha), f.values))


def frac_derivative(f: SampledFunction, alpha: float) -> SampledFunction:
    """Fractional derivative ``d/dt I^{1-alpha} f`` for ``alpha`` in [0, 1).

    The derivative of ``I^{1-alpha}f`` is singular at ``t = 0`` whenever
    ``f(0) != 0``; the value returned at the first node is then a one-sided
    finite difference, not the (infinite) limit.
    """
    if alpha == 0:
        return f.with_values(f.values.copy())
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    dt = f.grid.dt
    return f.with_values(_along(lambda x: _ddt(_rl_integral(x, dt, 1.0 - alpha), dt), f.values))


def empirical_holder_exponent(values: np.ndarray, dt: float, max_lag: int | None = None) -> float:
    """Slope of ``log max|f(t+h)-f(t)|`` against ``log h`` over dyadic lags."""
    x = np.moveaxis(np.asarray(values, dtype=float), _time_axis(np.asarray(values)), 0)
    n = x.shape[0] - 1
    max_lag = max_lag or max(1, n // 4)
    lags = [1]
    while lags[-1] * 2 <= max_lag:
        lags.append(lags[-1] * 2)
    amp = [np.max(np.abs(x[m:] - x[:-m])) for m in lags]
    if len(lags) < 2 or not np.any(amp):
        return float("inf")
    amp = np.maximum(np.asarray(amp), 1e-300)
    slope, _ = np.polyfit(np.log(np.asarray(lags) * dt), np.log(amp), 1)
    return float(slope)


def frac_op_negative(f: SampledFunction, alpha: float, kind: str = "integral") -> SampledFunction:
    """Fractional operators of negative order ``alpha`` in (-1, 0).

    kind
        ``"integral"``: ``d/dt I^{1+alpha} f``.
        ``"increment"``: ``Gamma(alpha+1)^{-1} int_0^t (t-s)^alpha df_s``;
        requires ``f(0) = 0`` and agrees with ``"integral"`` when ``f`` is
        Hoelder of order above ``-alpha``.
        ``"derivative"``: ``D^{1+alpha} int_0^. f``, which equals
        ``I^{-alpha} f``.
    """
    if not -1.0 < alpha < 0.0:
        raise ValueError(f"alpha must lie in (-1,0), got {alpha}")
    dt = f.grid.dt
    if kind == "integral":
        return f.with_values(_along(lambda x: _ddt(_rl_integral(x, dt, 1.0 + alpha), dt), f.values))
    if kind == "increment":
        v0 = np.take(f.values, 0, axis=_time_axis(f.values))
        if np.any(np.abs(v0) > 1e-12 * max(1.0, float(np.max(np.abs(f.values))))):
            raise ValueError("increment form requires f(0) = 0")
        if f.values.ndim == 1 or f.values.size <= 64 * f.grid.n_nodes:
            h = empirical_holder_exponent(f.values, dt)
            if h <= -alpha:
                warnings.warn(f"empirical Hoelder exponent {h:.3f} <= {-alpha:.3f}; increment form may not match")
        return f.with_values(_along(lambda x: _increment_integral(x, dt, alpha), f.values))
    if kind == "derivative":
        def op(x):
            cum = integrate.cumulative_trapezoid(x, dx=dt, axis=0, initial=0.0)
            return _ddt(_rl_integral(cum, dt, -alpha), dt)
        return f.with_values(_along(op, f.values))
    raise ValueError(f"unknown kind {kind!r}")


@dataclass
class SemigroupReport:
    semigroup: float
    inversion: float

    @property
    def max_deviation(self) -> float:
        return max(self.semigroup, self.inversion)


def semigroup_check(f: SampledFunction, alpha: float, beta: float) -> SemigroupReport:
    """Relative sup-norm deviations of ``I^a I^b f`` from ``I^{a+b} f`` and of
    ``I^a D^a f``, ``D^a I^a f`` from ``f``.

    The inversion check is meaningful for ``f(0) = 0``.
    """
    if not (0 <= alpha < 1 and 0 <= beta < 1 and alpha + beta < 1):
        raise ValueError("need alpha, beta, alpha+beta in [0,1)")
    ref = frac_integral(f, alpha + beta).values
    lhs = frac_integral(frac_integral(f, beta), alpha).values
    scale = max(float(np.max(np.abs(ref))), 1e-300)
    sg = float(np.max(np.abs(lhs - ref))) / scale if np.any(ref) else float(np.max(np.abs(lhs)))
    fs = max(float(np.max(np.abs(f.values))), 1e-300)
    inv1 = frac_integral(frac_derivative(f, alpha), alpha).values
    inv2 = frac_derivative(frac_integral(f, alpha), alpha).values
    inv = max(float(np.max(np.abs(inv1 - f.values))), float(np.max(np.abs(inv2 - f.values))))
    if np.any(f.values):
        inv /= fs
    return SemigroupReport(sg, inv)
