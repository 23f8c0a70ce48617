"""Time stepping for ``dX = (g(X) + u(X)) dt + dW^H + dpsi`` and path diagnostics.

Both schemes evolve the remainder ``theta = X - W - psi`` and rebuild ``X``
from it, so the decomposition holds node by node and ``g = u = 0`` gives
``X = x0 + W`` exactly.

* ``euler``: ``theta_{k+1} = theta_k + g_J(X_k) dt + u(X_k) dt``.
* ``averaged``: the drift increment over a step is the heat-averaged field
  along the conditional mean of the noise given its driver up to ``t_k``.

The linear part of ``u`` is treated implicitly once ``lam dt > 1/2``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .besov_drift import (BesovDrift, ConstantDrift, DissipativeField, RegimeLabel, classify_regime,
                          mollification_level)
from .fbm_core import FbmPath, HurstParams, TimeGrid, exp_kernel_integral
from .sewing import ExponentFit, averaged_field, averaging_nodes, loglog_fit

__all__ = [
    "SdeConfig",
    "SolutionPath",
    "NumericalFailure",
    "RegimeError",
    "solve",
    "solve_euler",
    "solve_averaged",
    "ou_reference",
    "holder_seminorm",
    "remainder_report",
    "RemainderReport",
    "stability_rate",
    "StabilityReport",
    "psi_perturbation_response",
    "PerturbationReport",
    "perturbation_exponent",
    "moment_profile",
    "MomentProfile",
]


class NumericalFailure(FloatingPointError):
    """Non-finite state; carries the step index and time."""

    def __init__(self, step: int, time: float, what: str = "state"):
        super().__init__(f"non-finite {what} at step {step} (t = {time:.6g})")
        self.step, self.time = step, time


class RegimeError(ValueError):
    pass


@dataclass
class SdeConfig:
    """Parameters of one SDE run.

    Parameters
    ----------
    hurst : HurstParams
    drift : BesovDrift, ConstantDrift or None
        ``None`` means ``g = 0``.
    u : DissipativeField or None
    x0 : array (d,) or (n_paths, d)
    grid : TimeGrid
    psi : callable ``t -> (d,)``, array (n_nodes, d), or None
    scheme : {"euler", "averaged"}
    J : int, optional
        Mollification level.  ``None`` applies ``ceil(H log2(1/dt))``; the
        drift is truncated at ``min(drift.J, J)``.
    n_quad : int
        Averaging nodes per step (averaged scheme).
    """

    hurst: HurstParams
    drift: object = None
    u: DissipativeField | None = None
    x0: object = 0.0
    grid: TimeGrid = None
    psi: object = None
    scheme: str = "euler"
    J: int | None = None
    n_quad: int = 8

    def __post_init__(self):
        if self.grid is None:
            raise ValueError("grid is required")
        if self.scheme not in ("euler", "averaged"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.drift is not None:
            if self.drift.d != self.hurst.d:
                raise ValueError("drift dimension does not match the noise dimension")
            if self.regime.wellposedness == "none":
                raise RegimeError(
                    f"alpha={self.drift.alpha} is below the weak-solution threshold for H={self.hurst.H}")

    @property
    def d(self) -> int:
        return self.hurst.d

    @property
    def regime(self):
        alpha = getattr(self.drift, "alpha", 0.0) if self.drift is not None else 0.0
        if alpha >= 0:
            return RegimeLabel("subcritical", "strong")
        return classify_regime(alpha, self.hurst.H)

    @property
    def level(self) -> int | None:
        if not isinstance(self.drift, BesovDrift):
            return None
        J = mollification_level(self.grid.dt, self.hurst.H) if self.J is None else int(self.J)
        return min(self.drift.J, J)

    def effective_drift(self):
        if isinstance(self.drift, BesovDrift):
            return self.drift.truncate(self.level)
        return self.drift

    def x0_array(self, n_paths: int) -> np.ndarray:
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 0:
            x0 = np.full(self.d, float(x0))
        return np.broadcast_to(x0, (n_paths, self.d)).copy()

    def psi_values(self) -> np.ndarray | None:
        if self.psi is None:
            return None
        if callable(self.psi):
            return np.stack([np.broadcast_to(np.asarray(self.psi(t), dtype=float), (self.d,)) for t in self.grid.nodes])
        arr = np.asarray(self.psi, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape != (self.grid.n_nodes, self.d):
            raise ValueError("psi array must have shape (n_nodes, d)")
        return arr

    def replace(self, **kw) -> "SdeConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "H": self.hurst.H,
            "d": self.d,
            "drift": None if self.drift is None else self.drift.to_dict(),
            "u": None if self.u is None else self.u.to_dict(),
            "x0": np.asarray(self.x0, dtype=float).tolist(),
            "grid": {"dt": self.grid.dt, "n_steps": self.grid.n_steps, "t_start": self.grid.t_start},
            "psi": None if self.psi is None else self.psi_values().tolist(),
            "scheme": self.scheme,
            "J": self.level,
            "n_quad": self.n_quad,
        }


@dataclass
class SolutionPath:
    grid: TimeGrid
    X: np.ndarray  # (P, n+1, d)
    theta: np.ndarray  # (P, n+1, d)
    noise: FbmPath
    psi: np.ndarray | None  # (n+1, d)
    J: int | None
    scheme: str = "euler"

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    def decomposition_error(self) -> float:
        psi = 0.0 if self.psi is None else self.psi[None]
        return float(np.max(np.abs(self.X - (self.theta + self.noise.values + psi))))

    def to_csv(self, path_index: int = 0) -> str:
        from .io import format_float

        d = self.X.shape[-1]
        head = ["t"] + [f"x_{i}" for i in range(d)] + [f"theta_{i}" for i in range(d)] + [f"w_{i}" for i in range(d)]
        lines = [",".join(head)]
        W = self.noise.values[path_index]
        for k, t in enumerate(self.grid.nodes):
            row = [t, *self.X[path_index, k], *self.theta[path_index, k], *W[k]]
            lines.append(",".join(format_float(v) for v in row))
        return "\n".join(lines) + "\n"


def _check_noise(cfg: SdeConfig, noise: FbmPath):
    g = noise.grid
    if (g.dt, g.n_steps, g.t_start) != (cfg.grid.dt, cfg.grid.n_steps, cfg.grid.t_start):
        raise ValueError("noise is not sampled on the configured grid")
    if noise.values.shape[-1] != cfg.d:
        raise ValueError("noise dimension does not match config")


def _u_split(u: DissipativeField | None, dt: float):
    """Return (implicit_rate, explicit_fn)."""
    if u is None:
        return 0.0, None
    if u.fn is None and u.lam * dt > 0.5:
        rest = (lambda x: u.pert * np.sin(x)) if u.pert else None
        return u.lam, rest
    return 0.0, u


def _march(cfg: SdeConfig, noise: FbmPath, drift_increment: Callable) -> SolutionPath:
    _check_noise(cfg, noise)
    grid = cfg.grid
    dt, n = grid.dt, grid.n_steps
    W = noise.values
    P = W.shape[0]
    psi = cfg.psi_values()
    shift = W if psi is None else W + psi[None]
    X = np.empty_like(W)
    theta = np.empty_like(W)
    X[:, 0] = cfg.x0_array(P)
    theta[:, 0] = X[:, 0] - shift[:, 0]
    imp, expl = _u_split(cfg.u, dt)
    times = grid.nodes
    for k in range(n):
        xk = X[:, k]
        inc = drift_increment(k, xk, theta[:, k])
        if expl is not None:
            inc = inc + expl(xk) * dt
        if imp > 0:
            nxt = (theta[:, k] + inc - imp * dt * shift[:, k + 1]) / (1.0 + imp * dt)
        else:
            nxt = theta[:, k] + inc
        theta[:, k + 1] = nxt
        X[:, k + 1] = nxt + shift[:, k + 1]
        if not np.all(np.isfinite(X[:, k + 1])):
            raise NumericalFailure(k + 1, float(times[k + 1]))
    return SolutionPath(grid, X, theta, noise, psi, cfg.level, cfg.scheme)


def solve_euler(cfg: SdeConfig, noise: FbmPath) -> SolutionPath:
    """Explicit Euler for the mollified drift (semi-implicit stiff linear part)."""
    g = cfg.effective_drift()
    dt = cfg.grid.dt

    def inc(k, x, th):
        return g(x) * dt if g is not None else np.zeros_like(x)

    return _march(cfg, noise, inc)


def _averaging_setup(cfg: SdeConfig, noise: FbmPath):
    """Averaging nodes, conditional-mean curves (P, n, q, d) and psi at the nodes (n, q, d) or None."""
    dt = cfg.grid.dt
    theta_q, _ = averaging_nodes(cfg.hurst.H, cfg.n_quad)
    curves = noise.driver.scheme.cond_mean_curves(noise.driver, theta_q)
    psi_fn = cfg.psi
    psi_q = None
    if psi_fn is not None:
        if callable(psi_fn):
            nodes = cfg.grid.nodes[:-1, None] + theta_q[None, :] * dt
            psi_q = np.stack([[np.broadcast_to(np.asarray(psi_fn(r), dtype=float), (cfg.d,)) for r in row] for row in nodes])
        else:
            pv = cfg.psi_values()
            # linear interpolation of a sampled perturbation
            psi_q = pv[:-1, None, :] + theta_q[None, :, None] * (pv[1:, None, :] - pv[:-1, None, :])
    return theta_q, curves, psi_q


def solve_averaged(cfg: SdeConfig, noise: FbmPath) -> SolutionPath:
    """Averaged-field scheme; needs a noise path that carries its driver.

    The base point on step ``k`` is ``theta_k + E[W_r | driver up to t_k] +
    psi_r`` at the averaging nodes ``r``; the drift is heat-smoothed with
    variance ``c_tilde (r - t_k)^{2H}``.
    """
    g = cfg.effective_drift()
    dt = cfg.grid.dt
    H = cfg.hurst.H
    if g is None:
        return _march(cfg, noise, lambda k, x, th: np.zeros_like(x))
    if isinstance(g, ConstantDrift):
        # heat smoothing fixes constants; the increment is exactly c dt
        c = np.asarray(g.value)
        return _march(cfg, noise, lambda k, x, th: np.broadcast_to(c * dt, x.shape).copy())
    if noise.driver is None:
        raise ValueError("averaged scheme needs noise sampled by sample_fbm_mvn (driver required)")
    theta_q, curves, psi_q = _averaging_setup(cfg, noise)
    c_tilde = cfg.hurst.c_tilde_H

    def inc(k, x, th):
        base = th[:, None, :] + curves[:, k]
        if psi_q is not None:
            base = base + psi_q[k][None]
        return averaged_field(g, np.zeros_like(th), H, 0.0, dt, mean_curve=base, n_quad=cfg.n_quad, c_tilde=c_tilde)

    return _march(cfg, noise, inc)


def solve(cfg: SdeConfig, noise: FbmPath) -> SolutionPath:
    return solve_averaged(cfg, noise) if cfg.scheme == "averaged" else solve_euler(cfg, noise)


# --------------------------------------------------------------------------
# reference process and path statistics
# --------------------------------------------------------------------------


def ou_reference(lam: float, noise: FbmPath, psi=None) -> np.ndarray:
    """``Y_t = int_0^t exp(-lam (t-r)) d(W + psi)_r`` by the exact exponential recursion.

    ``psi`` is a callable or an array (n_nodes, d).  Returns (P, n_nodes, d).
    """
    vals = noise.values
    if psi is not None:
        if callable(psi):
            pv = np.stack([np.broadcast_to(np.asarray(psi(t), dtype=float), vals.shape[-1:]) for t in noise.grid.nodes])
        else:
            pv = np.asarray(psi, dtype=float).reshape(noise.grid.n_nodes, -1)
        vals = vals + pv[None]
    return exp_kernel_integral(vals, noise.grid, lam)


@dataclass
class MomentProfile:
    """``||Y||_{L^m} / sqrt(m)`` per order and time.

    Standard errors use the delta method on the raw moments: each path
    contributes an influence value, so differences between orders are paired
    and their errors are consistent for the full-sample estimator.
    """

    orders: np.ndarray
    values: np.ndarray  # (n_orders, n_times)
    influence: np.ndarray  # (P, n_orders, n_times), mean zero over paths

    def standard_errors(self) -> np.ndarray:
        return self.influence.std(axis=0, ddof=1) / math.sqrt(len(self.influence))

    def step_excess(self) -> tuple[np.ndarray, np.ndarray]:
        """Successive differences ``v_{m_{i+1}} - v_{m_i}`` and their standard errors."""
        diff = np.diff(self.values, axis=0)
        d_inf = np.diff(self.influence, axis=1)
        return diff, d_inf.std(axis=0, ddof=1) / math.sqrt(len(d_inf))

    def as_dict(self) -> dict:
        d, se = self.step_excess()
        return {"orders": self.orders.tolist(), "values": self.values.tolist(), "se": self.standard_errors().tolist(),
                "step_excess": d.tolist(), "step_se": se.tolist()}


def moment_profile(samples, orders=(2, 4, 8, 16)) -> MomentProfile:
    """Scaled ``L^m`` norms of ``samples`` (P, n_times) over paths."""
    y = np.abs(np.asarray(samples, dtype=float))
    if y.ndim == 1:
        y = y[:, None]
    orders = np.asarray(orders, dtype=float)
    vals, infl = [], []
    for m in orders:
        ym = y**m
        M = ym.mean(axis=0)
        v = M ** (1 / m) / math.sqrt(m)
        vals.append(v)
        # d v / d M = v / (m M)
        infl.append(np.where(M > 0, v / (m * np.where(M > 0, M, 1.0)), 0.0) * (ym - M))
    return MomentProfile(orders, np.stack(vals), np.stack(infl, axis=1))


def holder_seminorm(path, exponent: float, dt: float, window: float = 1.0) -> np.ndarray | float:
    """``max |X_t - X_s| / |t-s|^beta`` over node pairs with ``0 < t-s <= window``.

    ``path`` is (n,) or (..., n, d); the time axis is -1 for 1-D input and -2
    otherwise.  The Euclidean norm is taken over the last axis for ``d > 1``.
    """
    if window > 1.0 + 1e-12:
        raise ValueError("window must be <= 1")
    x = np.asarray(path, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
        squeeze = True
    else:
        squeeze = False
    n = x.shape[-2]
    max_lag = min(n - 1, int(math.floor(window / dt + 1e-9)))
    best = np.zeros(x.shape[:-2])
    for lag in range(1, max_lag + 1):
        diff = np.linalg.norm(x[..., lag:, :] - x[..., :-lag, :], axis=-1)
        best = np.maximum(best, diff.max(axis=-1) / (lag * dt) ** exponent)
    return float(best) if squeeze or best.ndim == 0 else best


@dataclass
class RemainderReport:
    exponent: float | None
    fit: ExponentFit | None
    status: str  # "ok" | "constant remainder"

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "status": self.status, "fit": None if self.fit is None else self.fit.as_dict()}


def remainder_report(sol: SolutionPath, min_lag: int = 1, max_lag_fraction: float = 0.125) -> RemainderReport:
    """Fit ``E|theta_{s,t}|^2 ~ |t-s|^{2 delta}`` over dyadic lags; report ``delta``.

    The mean runs over paths, coordinates and all start nodes.
    """
    th = sol.theta
    n = th.shape[1] - 1
    dt = sol.grid.dt
    lags = []
    m = min_lag
    while m <= max(1, int(n * max_lag_fraction)):
        lags.append(m)
        m *= 2
    ms = np.array([np.mean((th[:, l:] - th[:, :-l]) ** 2) for l in lags])
    if np.all(ms <= 1e-28 * max(1.0, float(np.max(np.abs(th))) ** 2)):
        return RemainderReport(None, None, "constant remainder")
    fit = loglog_fit(np.array(lags) * dt, ms)
    return RemainderReport(fit.slope / 2, fit, "ok")


# --------------------------------------------------------------------------
# stability and perturbation
# --------------------------------------------------------------------------


@dataclass
class StabilityReport:
    kind: str
    discrepancies: np.ndarray
    distances: np.ndarray  # L^m norms of sup |X1 - X2|
    std_errors: np.ndarray
    slope: float | None
    alpha_prime: float | None = None
    notice: str = ""

    def as_dict(self) -> dict:
        return {"kind": self.kind, "discrepancies": self.discrepancies.tolist(), "distances": self.distances.tolist(),
                "std_errors": self.std_errors.tolist(), "slope": self.slope, "alpha_prime": self.alpha_prime,
                "notice": self.notice}


def _sup_dist(a: SolutionPath, b: SolutionPath, t_max: float) -> np.ndarray:
    k = int(round(min(t_max, a.grid.t_end) / a.grid.dt))
    return np.max(np.linalg.norm(a.X[:, : k + 1] - b.X[:, : k + 1], axis=-1), axis=1)


def _lm(x: np.ndarray, m: float) -> tuple[float, float]:
    v = np.mean(x**m)
    se_v = np.std(x**m) / math.sqrt(len(x))
    val = v ** (1 / m)
    return float(val), float(val * se_v / (m * v)) if v > 0 else 0.0


def stability_rate(cfg: SdeConfig, noise: FbmPath, pairs: Sequence, kind: str = "x0", m: float = 2.0,
                   alpha_prime: float | None = None, t_max: float = 1.0) -> StabilityReport:
    """Distance ``||sup_{[0, t_max]} |X^1 - X^2| ||_{L^m}`` against the input discrepancy.

    ``kind = "x0"``: pairs of initial conditions; discrepancy ``|x0 - x0'|``.
    ``kind = "drift"``: pairs of levels ``(J, J')``; discrepancy is the block
    norm of ``g_J - g_{J'}`` in ``B^{alpha'}`` (default ``alpha' = -1/(2H)``).
    Both solutions of a pair share ``noise``.
    """
    notice = ""
    if cfg.drift is not None and cfg.regime.wellposedness != "strong":
        notice = "weak regime: uniqueness is not guaranteed, stability is reported without claim"
        warnings.warn(notice, stacklevel=2)
    disc, dist, se = [], [], []
    if kind == "x0":
        for a, b in pairs:
            s1 = solve(cfg.replace(x0=a), noise)
            s2 = solve(cfg.replace(x0=b), noise)
            disc.append(float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
            v, e = _lm(_sup_dist(s1, s2, t_max), m)
            dist.append(v)
            se.append(e)
    elif kind == "drift":
        if not isinstance(cfg.drift, BesovDrift):
            raise ValueError("drift stability needs a lacunary drift")
        alpha_prime = -1.0 / (2.0 * cfg.hurst.H) if alpha_prime is None else alpha_prime
        for J1, J2 in pairs:
            lo, hi = sorted((int(J1), int(J2)))
            if hi > cfg.drift.J:
                raise ValueError("pair level exceeds the stored drift")
            full = cfg.drift.truncate(hi)
            diff = full.difference(full.truncate(lo)) if hi > lo else None
            disc.append(0.0 if diff is None else diff.block_norm(alpha_prime))
            s1 = solve(cfg.replace(J=lo), noise)
            s2 = solve(cfg.replace(J=hi), noise)
            v, e = _lm(_sup_dist(s1, s2, t_max), m)
            dist.append(v)
            se.append(e)
    else:
        raise ValueError("kind must be 'x0' or 'drift'")
    disc, dist, se = np.array(disc), np.array(dist), np.array(se)
    pos = (disc > 0) & (dist > 0)
    slope = loglog_fit(disc[pos], dist[pos]).slope if pos.sum() >= 2 else None
    return StabilityReport(kind, disc, dist, se, slope, alpha_prime, notice)


def perturbation_exponent(alpha: float, H: float) -> float:
    """Saturation point ``chi_0`` of ``(2 beta + H)(1-chi) + beta chi = 1`` with
    ``beta = 1 + H(alpha - 1)``; clipped to ``(0, 1)``."""
    beta = 1.0 + H * (alpha - 1.0)
    chi = (2 * beta + H - 1.0) / (beta + H)
    return float(min(max(chi, 0.0), 1.0))


@dataclass
class PerturbationReport:
    eps: np.ndarray
    response: np.ndarray
    power: float | None
    chi: float

    def as_dict(self) -> dict:
        return {"eps": self.eps.tolist(), "response": self.response.tolist(), "power": self.power, "chi": self.chi}


def psi_perturbation_response(cfg: SdeConfig, noise: FbmPath, psi: Callable, eps_values, m: float = 2.0) -> PerturbationReport:
    """``||sup |X^{eps psi} - X| ||_{L^m}`` for each ``eps``; fitted power in ``eps``."""
    base = solve(cfg.replace(psi=None), noise)
    eps = np.asarray(list(eps_values), dtype=float)
    resp = []
    for e in eps:
        if e == 0:
            resp.append(0.0)
            continue
        pert = solve(cfg.replace(psi=lambda t, e=e: e * np.asarray(psi(t), dtype=float)), noise)
        resp.append(_lm(_sup_dist(base, pert, cfg.grid.t_end), m)[0])
    resp = np.array(resp)
    pos = (eps > 0) & (resp > 0)
    power = loglog_fit(eps[pos], resp[pos]).slope if pos.sum() >= 2 else None
    alpha = getattr(cfg.drift, "alpha", 0.0) if cfg.drift is not None else 0.0
    return PerturbationReport(eps, resp, power, perturbation_exponent(min(alpha, 0.0), cfg.hurst.H))
