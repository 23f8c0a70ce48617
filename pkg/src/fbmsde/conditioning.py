"""Conditioning fBm on its past.

The two-sided fBm splits, for ``t >= 0``, into a Riemann--Liouville part driven
by the future white noise and the conditional mean given the past path ``w``:

    W_t = c_H int_0^t (t-r)^{H-1/2} dB_r + (A w)_t,
    (A w)_t = K_H int_0^inf r^{-1} f(t/r) w_{-r} dr,

with kernel

    f(x) = x^{H-1/2} + (H-3/2) x int_0^1 (u+x)^{H-5/2} (1-u)^{1/2-H} du.

The prefactor is ``K_H = (1/2-H) c_H c_{1-H}`` where the companion constant is
``c_{1-H} = 1/(c_H Gamma(H+1/2) Gamma(3/2-H))``, i.e. ``K_H = cos(pi H)/pi``.
This value makes ``A w`` the conditional mean (checked against the exact
Gaussian regression in the tests).

Past paths live on nonpositive, increasing time nodes ending at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, special

from .fbm_core import (
    FbmPath,
    HurstParams,
    MvnScheme,
    TimeGrid,
    _cholesky_with_jitter,
    fbm_covariance_matrix,
)

__all__ = [
    "PastPath",
    "NoiseNormParams",
    "wminus_norm",
    "kernel_f",
    "kernel_f_table",
    "companion_constant",
    "A_prefactor",
    "apply_A",
    "conditioned_fbm",
    "sample_past_exact",
    "flip_R",
    "shift_concat",
    "theta_shift",
]


@dataclass
class PastPath:
    """Path on nonpositive times.

    ``times`` is increasing with ``times[-1] == 0``; ``values`` has shape
    ``(n_paths, n_nodes, d)`` and vanishes at time 0.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :, None]
        elif v.ndim == 2:
            v = v[None]
        self.values = v
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("past path needs at least 2 nodes")
        if self.times[-1] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("past times must increase strictly and end at 0")
        if v.shape[1] != len(self.times):
            raise ValueError("values do not match times")
        if np.any(v[:, -1, :] != 0.0):
            raise ValueError("past path must vanish at time 0")

    @classmethod
    def uniform(cls, T_past: float, n_steps: int, values) -> "PastPath":
        return cls(np.linspace(-T_past, 0.0, n_steps + 1), values)

    @classmethod
    def from_callable(cls, fn, times) -> "PastPath":
        times = np.asarray(times, dtype=float)
        return cls(times, fn(times))

    @property
    def T_past(self) -> float:
        return -float(self.times[0])

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def evaluate(self, s) -> np.ndarray:
        """Linear interpolation at times ``s`` in ``[times[0], 0]``; shape (P, len(s), d)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        tol = 1e-12 * max(1.0, self.T_past)
        if np.any(s < self.times[0] - tol) or np.any(s > tol):
            raise ValueError("evaluation outside the past extent")
        s = np.clip(s, self.times[0], 0.0)
        idx = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, len(self.times) - 2)
        lo, hi = self.times[idx], self.times[idx + 1]
        fr = (s - lo) / (hi - lo)
        return self.values[:, idx, :] * (1 - fr)[None, :, None] + self.values[:, idx + 1, :] * fr[None, :, None]


@dataclass(frozen=True)
class NoiseNormParams:
    """Exponents of the weighted Hoelder norm on past paths.

    ``gamma`` in (0, H) and ``delta`` in (H - gamma, 1 - gamma).
    """

    gamma: float
    delta: float

    @classmethod
    def default(cls, H: float) -> "NoiseNormParams":
        gamma = 0.5 * H
        return cls(gamma, 0.5 * ((H - gamma) + (1.0 - gamma)))

    def validate(self, H: float) -> None:
        if not 0 < self.gamma < H:
            raise ValueError(f"gamma must lie in (0, H={H})")
        if not H - self.gamma < self.delta < 1 - self.gamma:
            raise ValueError("delta must lie in (H-gamma, 1-gamma)")


def wminus_norm(w: PastPath, p: NoiseNormParams, block: int = 256) -> np.ndarray:
    """Discrete weighted Hoelder norm ``sup |w_t-w_s| / (|t-s|^gamma (1+|t|+|s|)^delta)``.

    Returns one value per path.
    """
    t = w.times
    m = len(t)
    out = np.zeros(w.n_paths)
    pchunk = max(1, int(2e7 // (block * m * w.d)))
    for i0 in range(0, m, block):
        i1 = min(m, i0 + block)
        ti = t[i0:i1, None]
        dt_ = np.abs(ti - t[None, :])
        den = dt_**p.gamma * (1.0 + np.abs(ti) + np.abs(t[None, :])) ** p.delta
        den[dt_ == 0] = np.inf
        for p0 in range(0, w.n_paths, pchunk):
            v = w.values[p0 : p0 + pchunk]
            diff = np.linalg.norm(v[:, i0:i1, None, :] - v[:, None, :, :], axis=-1)
            out[p0 : p0 + pchunk] = np.maximum(out[p0 : p0 + pchunk], np.max(diff / den[None], axis=(1, 2)))
    return out


# --------------------------------------------------------------------------
# kernel
# --------------------------------------------------------------------------


def _kernel_f_scalar(x: float, H: float) -> float:
    # cancellation-free rewrite; both terms are positive for H < 1/2:
    # f = x(1+x)^{H-3/2} + (3/2-H) x int_0^1 (u+x)^{H-5/2} (1-(1-u)^{1/2-H}) du
    a = H - 2.5
    b = 0.5 - H
    q = lambda u: (u + x) ** a * -math.expm1(b * math.log1p(-u))
    # the mass sits near u ~ x: break at every decade between x and 1/2
    pts = list(x * 10.0 ** np.arange(0, max(0, math.ceil(math.log10(0.5 / x)))))
    left, _ = integrate.quad(q, 0.0, 0.5, points=pts or None, limit=500, epsabs=0.0, epsrel=1e-12)
    # on [1/2, 1] split off the algebraic endpoint factor (1-u)^b
    plain = ((1.0 + x) ** (a + 1) - (0.5 + x) ** (a + 1)) / (a + 1)
    alg, _ = integrate.quad(lambda u: (u + x) ** a, 0.5, 1.0, weight="alg", wvar=(0.0, b),
                            epsabs=0.0, epsrel=1e-13)
    return x * (1.0 + x) ** (H - 1.5) + (1.5 - H) * x * (left + plain - alg)


def kernel_f(x, H: float):
    """Kernel of the past-conditioning operator, by adaptive quadrature.

    Behaves like ``x^{H-1/2}`` as ``x -> inf`` and like ``x^{H+1/2}`` as
    ``x -> 0``.
    """
    if not 0.0 < H < 0.5:
        raise ValueError("kernel_f requires H in (0, 1/2)")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("kernel_f requires x > 0")
    out = np.vectorize(lambda v: _kernel_f_scalar(float(v), H), otypes=[float])(xa)
    return out if out.ndim else float(out)


class _KernelTable:
    """Cubic spline of ``log f`` against ``log x`` with asymptotic tails."""

    def __init__(self, H: float, lo: float = 1e-8, hi: float = 1e8, per_decade: int = 64):
        self.H = H
        n = int(round(math.log10(hi / lo) * per_decade)) + 1
        y = np.linspace(math.log(lo), math.log(hi), n)
        fx = np.array([_kernel_f_scalar(math.exp(v), H) for v in y])
        self.spline = interpolate.CubicSpline(y, np.log(fx))
        self.ylo, self.yhi = y[0], y[-1]
        # two-term expansions matched at the table ends
        self.c_lo = (fx[0] - lo ** (H + 0.5)) / lo
        self.c_hi = (fx[-1] - hi ** (H - 0.5) + hi ** (H - 1.5)) / hi ** (H - 2.5)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.log(x)
        out = np.empty_like(x)
        mid = (y >= self.ylo) & (y <= self.yhi)
        out[mid] = np.exp(self.spline(y[mid]))
        H = self.H
        s = y < self.ylo
        out[s] = x[s] ** (H + 0.5) + self.c_lo * x[s]
        b = y > self.yhi
        out[b] = x[b] ** (H - 0.5) - x[b] ** (H - 1.5) + self.c_hi * x[b] ** (H - 2.5)
        return out


@lru_cache(maxsize=16)
def kernel_f_table(H: float) -> _KernelTable:
    """Cached interpolant of :func:`kernel_f` (relative accuracy about 1e-8)."""
    if not 0.0 < H < 0.5:
        raise ValueError("kernel table requires H in (0, 1/2)")
    return _KernelTable(float(H))


def companion_constant(H: float) -> float:
    """``c_{1-H} = 1 / (c_H Gamma(H+1/2) Gamma(3/2-H))``."""
    c_H = HurstParams(H).c_H
    return 1.0 / (c_H * special.gamma(H + 0.5) * special.gamma(1.5 - H))


def A_prefactor(H: float) -> float:
    """``(1/2-H) c_H c_{1-H}``, equal to ``cos(pi H)/pi``; zero at ``H = 1/2``."""
    if H == 0.5:
        return 0.0
    return (0.5 - H) * HurstParams(H).c_H * companion_constant(H)


def apply_A(w: PastPath, H: float, out_grid: TimeGrid, per_decade: int = 256,
            r_min_factor: float = 1e-3, norm_params: NoiseNormParams | None = None,
            return_diagnostics: bool = False):
    """Conditional mean of the future fBm given the past path ``w``.

    The ``r``-integral is a trapezoid rule in ``log r`` on
    ``[r_min_factor*dt, T_past]``.  The piece below ``r_min`` is added
    analytically from the initial slope of ``w``; the piece beyond ``T_past``
    is bounded using the weighted norm of ``w`` and reported.

    Returns values of shape ``(n_paths, n_nodes, d)`` (and a diagnostics dict
    when ``return_diagnostics``).
    """
    if out_grid.t_start != 0.0:
        raise ValueError("out_grid must start at 0")
    if len(w.times) < 2:
        raise ValueError("empty past")
    if not 0.0 < H <= 0.5:
        raise ValueError("apply_A requires H in (0, 1/2]")
    t = out_grid.nodes
    P, d = w.n_paths, w.d
    if H == 0.5:
        out = np.zeros((P, len(t), d))
        diag = {"prefactor": 0.0, "n_nodes": 0, "tail_bound": 0.0, "small_r_correction": 0.0}
        return (out, diag) if return_diagnostics else out
    T_p = w.T_past
    r_min = r_min_factor * out_grid.dt
    if r_min >= T_p:
        raise ValueError("past extent shorter than the quadrature start")
    n_r = int(math.ceil(math.log10(T_p / r_min) * per_decade)) + 1
    y = np.linspace(math.log(r_min), math.log(T_p), n_r)
    r = np.exp(y)
    r[0], r[-1] = r_min, T_p
    wt = np.full(n_r, y[1] - y[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    fk = kernel_f_table(float(H))
    x = t[1:, None] / r[None, :]
    Kmat = np.zeros((len(t), n_r))
    Kmat[1:] = fk(x) * wt[None, :]
    w_r = w.evaluate(-r)  # (P, n_r, d)
    pref = A_prefactor(H)
    out = pref * np.einsum("tr,prd->ptd", Kmat, w_r)
    # below r_min: w_{-r} ~ slope * r, f ~ x^{H-1/2}
    slope = w.values[:, -2, :] / (-w.times[-2])
    small = np.zeros((len(t),))
    small[1:] = t[1:] ** (H - 0.5) * r_min ** (1.5 - H) / (1.5 - H)
    out += pref * small[None, :, None] * slope[:, None, :]
    # tail bound beyond T_past
    npar = norm_params or NoiseNormParams.default(H)
    nrm = float(np.max(wminus_norm(w, npar))) if len(w.times) <= 4096 else float("nan")
    T = out_grid.t_end
    # r = T_p v^{-1/eps} turns the r^{-1-eps} tail into a bounded integrand on (0, 1]
    eps = H + 0.5 - npar.gamma - npar.delta
    if eps <= 0:
        tail_int = float("inf")
    else:
        k = 1.0 / eps

        def tail_fn(v):
            rr = T_p * v ** (-k)
            return fk(np.array([T / rr]))[0] * rr ** (npar.gamma - 1) * (1 + rr) ** npar.delta * rr * k / v

        tail_int, _ = integrate.quad(tail_fn, 0.0, 1.0, limit=200)
    tail = abs(pref) * nrm * tail_int
    diag = {
        "prefactor": pref,
        "companion_constant": companion_constant(H),
        "r_min": r_min,
        "r_max": T_p,
        "per_decade": per_decade,
        "n_nodes": n_r,
        "small_r_correction": float(np.max(np.abs(pref * small[:, None] * np.abs(slope).max()))),
        "tail_bound": tail,
        "norm_params": {"gamma": npar.gamma, "delta": npar.delta},
    }
    return (out, diag) if return_diagnostics else out


def sample_past_exact(H: float, times, rng: np.random.Generator, n_paths: int = 1, d: int = 1) -> PastPath:
    """Exact fBm on the given nonpositive nodes (dense Cholesky)."""
    times = np.asarray(times, dtype=float)
    p = HurstParams(H, d)
    live = times != 0.0
    L = _cholesky_with_jitter(fbm_covariance_matrix(times[live], p))
    z = rng.standard_normal((n_paths, d, int(live.sum())))
    vals = np.zeros((n_paths, len(times), d))
    vals[:, live, :] = np.einsum("ij,pdj->pid", L, z)
    return PastPath(times, vals)


def conditioned_fbm(w: PastPath, H: float, grid: TimeGrid, rng: np.random.Generator,
                    **apply_kwargs) -> FbmPath:
    """fBm on ``grid`` conditioned to extend the past path ``w``.

    Equals a fresh Riemann--Liouville path plus ``A w``; one path per past
    path.  ``offset`` on the result holds ``A w``.
    """
    aw = apply_A(w, H, grid, **apply_kwargs)
    p = HurstParams(H, w.d)
    scheme = MvnScheme(p, grid, past_horizon=0.0)
    drv = scheme.sample_driver(rng, w.n_paths)
    rl = scheme.values(drv)
    return FbmPath(grid=grid, values=rl + aw, params=p, driver=drv, past=w, offset=aw)


# --------------------------------------------------------------------------
# flip, shift and concatenation
# --------------------------------------------------------------------------


def flip_R(w: PastPath, T: float, out_times=None) -> tuple[np.ndarray, np.ndarray]:
    """``t -> w(-T) - w(t-T)`` on ``[0, T]``.

    Evaluated at ``out_times`` (default: the past nodes in ``[-T, 0]`` shifted
    by ``T``).  Returns ``(times, values)``.
    """
    if T > w.T_past + 1e-12 or T < 0:
        raise ValueError("T exceeds the past extent")
    if out_times is None:
        out_times = w.times[w.times >= -T - 1e-12] + T
        if out_times[0] > 1e-12:
            out_times = np.concatenate([[0.0], out_times])
    out_times = np.clip(np.asarray(out_times, dtype=float), 0.0, T)
    base = w.evaluate([-T])
    return out_times, base - w.evaluate(out_times - T)


def _future_eval(w_plus, s) -> np.ndarray:
    grid = w_plus.grid
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < grid.t_start - 1e-12) or np.any(s > grid.t_end + 1e-12):
        raise ValueError("future path does not cover the requested times")
    vals = np.asarray(w_plus.values, dtype=float)
    if vals.ndim == 2:
        vals = vals[None]
    x = grid.nodes
    idx = np.clip(np.searchsorted(x, s, side="right") - 1, 0, len(x) - 2)
    fr = (s - x[idx]) / (x[idx + 1] - x[idx])
    return vals[:, idx, :] * (1 - fr)[None, :, None] + vals[:, idx + 1, :] * fr[None, :, None]


def shift_concat(w_minus: PastPath, w_plus, t: float) -> PastPath:
    """Concatenate past and future and recentre at ``t``.

    For nodes ``s`` of ``w_minus``: ``w_plus(t+s) - w_plus(t)`` if ``s > -t``,
    else ``w_minus(t+s) - w_plus(t)``.  ``w_plus`` is any object with ``grid``
    (starting at 0) and ``values``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if w_plus.grid.t_start != 0.0 or w_plus.grid.t_end < t - 1e-12:
        raise ValueError("future grid must start at 0 and reach t")
    s = w_minus.times
    wt = _future_eval(w_plus, [t])
    if wt.shape[0] not in (1, w_minus.n_paths) or wt.shape[2] != w_minus.d:
        raise ValueError("mismatched path batches")
    P = max(w_minus.n_paths, wt.shape[0])
    out = np.zeros((P, len(s), w_minus.d))
    fut = s > -t
    if np.any(fut):
        out[:, fut, :] = _future_eval(w_plus, t + s[fut]) - wt
    if np.any(~fut):
        out[:, ~fut, :] = w_minus.evaluate(np.minimum(t + s[~fut], 0.0)) - wt
    out[:, -1, :] = 0.0
    return PastPath(s.copy(), out)


def theta_shift(w: PastPath, t: float) -> PastPath:
    """``s -> w(s-t) - w(-t)`` on the nodes ``s`` with ``s - t`` inside the extent."""
    if t < 0 or t >= w.T_past:
        raise ValueError("shift outside the past extent")
    s = w.times[w.times - t >= w.times[0] - 1e-12]
    vals = w.evaluate(s - t) - w.evaluate([-t])
    vals[:, -1, :] = 0.0
    return PastPath(s, vals)
