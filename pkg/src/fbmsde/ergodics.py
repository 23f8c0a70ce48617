"""Long-run statistics, coupling, Jacobians and measure change for the SDE.

Jacobians are the exact derivatives of the discrete step maps used by
:mod:`fbmsde.sde_solver`, so finite differences of the scheme converge to
them at rate ``O(eps)`` and the inverse is the product of inverted step
matrices (``J J^{-1} = I`` up to rounding).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from .besov_drift import ConstantDrift
from .fbm_core import FbmPath, HurstParams, TimeGrid, sample_fbm_mvn
from .fraccalc import SampledFunction, frac_op_negative
from .sde_solver import (NumericalFailure, SdeConfig, SolutionPath, _averaging_setup, _u_split,
                         holder_seminorm, solve)
from .sewing import averaging_nodes

__all__ = [
    "EmpiricalMeasure",
    "long_run",
    "LongRunFailure",
    "fou_stationary_variance",
    "TightnessReport",
    "tightness_report",
    "CouplingReport",
    "coupling_contraction",
    "JacobianPath",
    "jacobian_evolve",
    "NoiseDerivative",
    "noise_derivative",
    "GirsanovReport",
    "girsanov_kappa",
    "girsanov_drift",
    "measure_distance",
]


# --------------------------------------------------------------------------
# empirical measures
# --------------------------------------------------------------------------


@dataclass
class EmpiricalMeasure:
    times: np.ndarray
    samples: np.ndarray  # (N, d)
    box: tuple  # (lo, hi), same for every coordinate
    bins: int
    counts: np.ndarray  # per-coordinate histograms, (d, bins)
    stationarity_l1: float | None = None
    stats: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, box=(-5.0, 5.0), bins: int = 50, times=None) -> "EmpiricalMeasure":
        x = np.asarray(samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        lo, hi = map(float, box)
        edges = np.linspace(lo, hi, bins + 1)
        # samples outside the box land in the end bins, so mass = sample count
        xc = np.clip(x, lo, hi)
        counts = np.stack([np.histogram(xc[:, i], bins=edges)[0] for i in range(x.shape[1])])
        t = np.zeros(len(x)) if times is None else np.asarray(times, dtype=float)
        return cls(t, x, (lo, hi), bins, counts)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.box[0], self.box[1], self.bins + 1)

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        return self.samples.var(axis=0, ddof=1)

    def histogram_rows(self):
        e = self.edges
        rows = []
        for i in range(self.bins):
            rows.append([float(e[i]), float(e[i + 1])] + [int(c) for c in self.counts[:, i]])
        return rows

    def as_dict(self) -> dict:
        return {"n_samples": int(len(self.samples)), "box": list(self.box), "bins": self.bins,
                "mean": self.mean.tolist(), "variance": self.variance.tolist(),
                "stationarity_l1": self.stationarity_l1, **self.stats}


def measure_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure, kind: str = "histogram-L1") -> float:
    """``histogram-L1``: sum of absolute differences of normalised counts
    (max over coordinates).  ``1-wasserstein-per-coordinate``: max over
    coordinates of the 1-D W1 distance between the samples."""
    if m1.samples.shape[1] != m2.samples.shape[1]:
        raise ValueError("dimension mismatch")
    if kind == "histogram-L1":
        if m1.box != m2.box or m1.bins != m2.bins:
            raise ValueError("histogram specs differ")
        p = m1.counts / m1.counts.sum(axis=1, keepdims=True)
        q = m2.counts / m2.counts.sum(axis=1, keepdims=True)
        return float(np.max(np.abs(p - q).sum(axis=1)))
    if kind == "1-wasserstein-per-coordinate":
        return float(max(stats.wasserstein_distance(m1.samples[:, i], m2.samples[:, i])
                         for i in range(m1.samples.shape[1])))
    raise ValueError(f"unknown distance {kind!r}")


class LongRunFailure(NumericalFailure):
    pass


def fou_stationary_variance(H: float, lam: float) -> float:
    """Stationary variance of ``dY = -lam Y dt + dW^H``: ``H Gamma(2H) lam^{-2H}``."""
    return H * math.gamma(2 * H) * lam ** (-2 * H)


def long_run(cfg: SdeConfig, T_total: float, burn_in: float, thinning: int = 1, *, rng=None,
             n_paths: int = 1, box=(-5.0, 5.0), bins: int = 50, past_horizon: float | None = None,
             noise: FbmPath | None = None) -> EmpiricalMeasure:
    """Simulate to ``T_total`` from ``cfg.x0`` and collect thinned post-burn-in states.

    ``cfg.grid`` supplies ``dt``; a grid over ``[0, T_total]`` with that step
    is built here unless ``noise`` is given.  The stationarity diagnostic is
    the histogram L1 distance between the two halves of the kept window.
    """
    dt = cfg.grid.dt
    n = int(round(T_total / dt))
    grid = TimeGrid(dt, n)
    run_cfg = cfg.replace(grid=grid)
    if noise is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        noise = sample_fbm_mvn(cfg.hurst, grid, past_horizon, rng, n_paths)
    try:
        sol = solve(run_cfg, noise)
    except NumericalFailure as exc:
        raise LongRunFailure(exc.step, exc.time, "state (long run)") from None
    k0 = int(math.ceil(burn_in / dt))
    idx = np.arange(k0, n + 1, thinning)
    X = sol.X[:, idx, :]  # (P, m, d)
    times = np.broadcast_to(grid.nodes[idx], X.shape[:2]).reshape(-1)
    m = EmpiricalMeasure.from_samples(X.reshape(-1, X.shape[-1]), box, bins, times)
    half = len(idx) // 2
    if half >= 1:
        a = EmpiricalMeasure.from_samples(X[:, :half].reshape(-1, X.shape[-1]), box, bins)
        b = EmpiricalMeasure.from_samples(X[:, half:].reshape(-1, X.shape[-1]), box, bins)
        m.stationarity_l1 = measure_distance(a, b)
    # variance standard error from per-path, per-segment batch means
    seg = max(1, len(idx) // 16)
    nb = len(idx) // seg
    batches = X[:, : nb * seg].reshape(X.shape[0], nb, seg, -1)
    bvar = (batches**2).mean(axis=2).reshape(-1, X.shape[-1])
    m.stats = {"second_moment_se": (bvar.std(axis=0, ddof=1) / math.sqrt(len(bvar))).tolist(),
               "second_moment": (X**2).mean(axis=(0, 1)).tolist(), "T_total": T_total, "burn_in": burn_in}
    m._solution = sol
    return m


# --------------------------------------------------------------------------
# tightness
# --------------------------------------------------------------------------


@dataclass
class TightnessReport:
    window_starts: np.ndarray
    kappas: np.ndarray
    table: np.ndarray  # (n_windows, n_kappa): E exp(kappa ||X||^2)
    rel_se: np.ndarray  # same shape
    kappa0: float
    gamma: float
    norms: np.ndarray = field(repr=False, default=None)  # (P, n_windows)

    def window_ratio(self, kappa: float) -> float:
        vals = self.expectation(kappa)
        return float(vals.max() / vals.min())

    def expectation(self, kappa: float) -> np.ndarray:
        return np.mean(np.exp(kappa * self.norms**2), axis=0)

    def as_dict(self) -> dict:
        return {"window_starts": self.window_starts.tolist(), "kappas": self.kappas.tolist(),
                "table": self.table.tolist(), "rel_se": self.rel_se.tolist(), "kappa0": self.kappa0,
                "gamma": self.gamma}


def tightness_report(paths, dt: float, gamma: float, kappas, window: float = 1.0, t_start: float = 0.0,
                     rel_se_max: float = 0.1, H: float | None = None) -> TightnessReport:
    """``E exp(kappa ||X||^2_{C^gamma([t, t+window])})`` per unit window.

    ``||X||_{C^gamma}`` is the sup norm plus the gamma-Hoelder seminorm on
    the window.  The empirical ``kappa0`` is the largest grid value whose
    Monte Carlo estimate has relative standard error at most ``rel_se_max``
    in every window (beyond it the estimate is carried by a few paths).
    """
    if H is not None and not gamma < H:
        raise ValueError("need gamma < H")
    x = np.asarray(paths, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    P, n_nodes, _ = x.shape
    per = int(round(window / dt))
    k_first = int(round(t_start / dt))
    starts = np.arange(k_first, n_nodes - per, per)
    if len(starts) == 0:
        raise ValueError("path shorter than one window")
    norms = np.empty((P, len(starts)))
    for i, k in enumerate(starts):
        seg = x[:, k : k + per + 1]
        sup = np.max(np.linalg.norm(seg, axis=-1), axis=1)
        norms[:, i] = sup + holder_seminorm(seg, gamma, dt, window=min(window, 1.0))
    kappas = np.asarray(list(kappas), dtype=float)
    table = np.empty((len(starts), len(kappas)))
    rse = np.empty_like(table)
    for j, kap in enumerate(kappas):
        with np.errstate(over="ignore"):
            e = np.exp(kap * norms**2)
        mu = e.mean(axis=0)
        table[:, j] = mu
        rse[:, j] = e.std(axis=0, ddof=1) / math.sqrt(P) / mu
    ok = np.all(np.isfinite(table) & (rse <= rel_se_max), axis=0)
    # largest kappa such that every smaller grid value is also fine
    k0 = 0.0
    for j in np.argsort(kappas):
        if not ok[j]:
            break
        k0 = float(kappas[j])
    return TightnessReport(starts * dt, kappas, table, rse, k0, gamma, norms)


# --------------------------------------------------------------------------
# coupling
# --------------------------------------------------------------------------


@dataclass
class CouplingReport:
    times: np.ndarray
    pairs: list
    distance: np.ndarray  # (n_pairs, P, n_nodes)
    window_sup: np.ndarray  # (n_pairs, P, n_windows)
    initial: np.ndarray  # (n_pairs,)
    median_ratio: float
    decay_rate: np.ndarray  # (n_pairs,) fitted -d log(dist)/dt, median over paths

    def as_dict(self) -> dict:
        return {"pairs": self.pairs, "initial": self.initial.tolist(), "median_ratio": self.median_ratio,
                "decay_rate": self.decay_rate.tolist(),
                "median_window_sup": np.median(self.window_sup, axis=1).tolist()}


def coupling_contraction(cfg: SdeConfig, x0_list, noise: FbmPath, window: float = 1.0) -> CouplingReport:
    """Evolve each initial condition with the same noise; pairwise distances.

    The uniqueness diagnostic is the median over paths and pairs of the
    terminal over initial distance.
    """
    if cfg.drift is not None and cfg.regime.wellposedness != "strong":
        warnings.warn("weak regime: coupling is reported without a uniqueness claim", stacklevel=2)
    sols = [solve(cfg.replace(x0=x), noise) for x in x0_list]
    pairs = [(i, j) for i in range(len(sols)) for j in range(i + 1, len(sols))]
    dist = np.stack([np.linalg.norm(sols[i].X - sols[j].X, axis=-1) for i, j in pairs])
    init = np.array([float(np.linalg.norm(np.asarray(x0_list[i], float) - np.asarray(x0_list[j], float))) for i, j in pairs])
    per = max(1, int(round(window / cfg.grid.dt)))
    nw = cfg.grid.n_steps // per
    wsup = np.stack([dist[..., w * per : (w + 1) * per + 1].max(axis=-1) for w in range(nw)], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # coincident starts never separate: count them as ratio 0
        ratio = np.where(init[:, None] > 0, dist[..., -1] / np.where(init > 0, init, 1.0)[:, None], 0.0)
        ld = np.log(np.maximum(dist, 1e-300))
    t = cfg.grid.nodes
    rate = np.median(-(ld[..., -1] - ld[..., 0]) / (t[-1] - t[0]), axis=1)
    return CouplingReport(t, pairs, dist, wsup, init, float(np.median(ratio)), rate)


# --------------------------------------------------------------------------
# Jacobian and noise derivative
# --------------------------------------------------------------------------


def _step_matrices(sol: SolutionPath, cfg: SdeConfig):
    """Per-step derivative ``M_k = dX_{k+1}/dX_k`` and forcing factor for noise shifts.

    Returns (M, c): ``M`` has shape (P, n, d, d); ``c`` is the scalar factor
    multiplying noise increments in the linearised step.
    """
    dt = cfg.grid.dt
    g = cfg.effective_drift()
    P, n1, d = sol.X.shape
    n = n1 - 1
    Xk = sol.X[:, :-1]
    A = np.zeros((P, n, d, d))
    if g is not None and not isinstance(g, ConstantDrift):
        if cfg.scheme == "averaged":
            H = cfg.hurst.H
            th, w = averaging_nodes(H, cfg.n_quad)
            _, curves, psi_q = _averaging_setup(cfg, sol.noise)
            base = sol.theta[:, :-1, None, :] + curves
            if psi_q is not None:
                base = base + psi_q[None]
            var = cfg.hurst.c_tilde_H * (th * dt) ** (2 * H)
            G = g.gradient(base, var=np.broadcast_to(var, base.shape[:-1]))  # (P, n, q, d, d)
            A += dt * np.einsum("q,pkqij->pkij", w, G)
        else:
            A += dt * g.gradient(Xk)
    imp, expl = _u_split(cfg.u, dt)
    if cfg.u is not None:
        if imp > 0:
            if cfg.u.pert:
                A += dt * (cfg.u.pert * np.cos(Xk))[..., :, None] * np.eye(d)
        else:
            A += dt * cfg.u.gradient(Xk)
    M = np.eye(d) + A
    c = 1.0
    if imp > 0:
        M = M / (1.0 + imp * dt)
        c = 1.0 / (1.0 + imp * dt)
    return M, c


@dataclass
class JacobianPath:
    J: np.ndarray  # (P, n+1, d, d)
    J_inv: np.ndarray
    max_identity_error: float
    worst_node: int

    def as_dict(self) -> dict:
        return {"max_identity_error": self.max_identity_error, "worst_node": self.worst_node}


def jacobian_evolve(sol: SolutionPath, cfg: SdeConfig) -> JacobianPath:
    """``J_{k+1} = M_k J_k`` and ``J^{-1}_{k+1} = J^{-1}_k M_k^{-1}``.

    Raises :class:`NumericalFailure` at the first node where a step matrix
    is singular or the inverse is non-finite.
    """
    M, _ = _step_matrices(sol, cfg)
    P, n, d, _ = M.shape
    J = np.empty((P, n + 1, d, d))
    Ji = np.empty_like(J)
    J[:, 0] = np.eye(d)
    Ji[:, 0] = np.eye(d)
    t = cfg.grid.nodes
    for k in range(n):
        J[:, k + 1] = M[:, k] @ J[:, k]
        try:
            Minv = np.linalg.inv(M[:, k])
        except np.linalg.LinAlgError:
            raise NumericalFailure(k + 1, float(t[k + 1]), "Jacobian inverse") from None
        Ji[:, k + 1] = Ji[:, k] @ Minv
        if not np.all(np.isfinite(Ji[:, k + 1])):
            raise NumericalFailure(k + 1, float(t[k + 1]), "Jacobian inverse")
    err = np.max(np.abs(J @ Ji - np.eye(d)), axis=(0, 2, 3))
    return JacobianPath(J, Ji, float(err.max()), int(np.argmax(err)))


@dataclass
class NoiseDerivative:
    ode: np.ndarray  # (P, n+1, d)
    formula: np.ndarray
    discrepancy: float  # max |ode - formula| / max |ode|


def noise_derivative(sol: SolutionPath, cfg: SdeConfig, v, jac: JacobianPath | None = None) -> NoiseDerivative:
    """Derivative of the solution in the noise direction ``v`` (array (n+1, d), ``v_0 = 0``).

    ODE route: ``K_{k+1} = M_k K_k + c (v_{k+1} - v_k)``.  Formula route:
    ``K_k = J_k sum_{i<k} J^{-1}_{i+1} c (v_{i+1} - v_i)``.  Both routes are
    the exact derivative of the Euler map under ``W -> W + eps v``; for the
    averaged scheme they omit the dependence of the increment on ``v``
    inside each cell, an ``O(dt)`` relative difference.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if np.any(np.abs(v[0]) > 0):
        raise ValueError("direction must start at 0")
    M, c = _step_matrices(sol, cfg)
    P, n, d, _ = M.shape
    dv = c * np.diff(v, axis=0)  # (n, d)
    K = np.zeros((P, n + 1, d))
    for k in range(n):
        K[:, k + 1] = np.einsum("pij,pj->pi", M[:, k], K[:, k]) + dv[k]
    jac = jac or jacobian_evolve(sol, cfg)
    inner = np.zeros((P, n + 1, d))
    inner[:, 1:] = np.cumsum(np.einsum("pkij,kj->pki", jac.J_inv[:, 1:], dv), axis=1)
    F = np.einsum("pkij,pkj->pki", jac.J, inner)
    scale = float(np.max(np.abs(K))) or 1.0
    return NoiseDerivative(K, F, float(np.max(np.abs(K - F))) / scale)


# --------------------------------------------------------------------------
# Girsanov
# --------------------------------------------------------------------------


def girsanov_kappa(H: float) -> float:
    """``1 / (c_H Gamma(H + 1/2))``: maps the integrated drift to the shift of
    the driving Brownian motion for the normalised moving-average fBm."""
    return 1.0 / (HurstParams(H).c_H * math.gamma(H + 0.5))


@dataclass
class GirsanovReport:
    h: np.ndarray  # (P, n+1, d)
    cm_norm2: np.ndarray  # (P,): int_0^T |h|^2
    statistic: float  # median over batches of the batch mean of exp(|h|^2 / 2)
    batch_values: np.ndarray
    unstable: bool
    log_weights: np.ndarray  # (P,): -int h dB - 1/2 int |h|^2

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def reweighted_moments(self, X: np.ndarray, x0=0.0) -> dict:
        """Self-normalised and plain weighted mean and second moment of ``X - x0`` per node."""
        w = self.weights
        Y = np.asarray(X) - np.asarray(x0)
        m1 = np.einsum("p,pkd->pkd", w, Y)
        m2 = np.einsum("p,pkd->pkd", w, Y**2)
        P = len(w)
        return {"mean": m1.mean(axis=0), "mean_se": m1.std(axis=0, ddof=1) / math.sqrt(P),
                "second": m2.mean(axis=0), "second_se": m2.std(axis=0, ddof=1) / math.sqrt(P)}

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "batch_values": self.batch_values.tolist(),
                "unstable": self.unstable, "mean_cm_norm2": float(self.cm_norm2.mean()),
                "weight_mean": float(self.weights.mean())}


def _discrete_shift(scheme, F: np.ndarray) -> np.ndarray:
    """Cell rates ``h_j`` whose tilt of the driver moves the sampled path mean by ``F``.

    For the moving-average sampler the mean shift at node ``k`` is
    ``c_H dt sum_{j<k} abar(k-j) h_j`` (``abar`` the cell-averaged kernel,
    the nearest cell carried by ``Z``), a lower-triangular Toeplitz system.
    """
    n = F.shape[1] - 1
    col = scheme.c_H * scheme.dt * scheme.avg_weights(np.arange(1, n + 1))
    # the inverse of a lower-triangular Toeplitz matrix is lower-triangular
    # Toeplitz: find its first column once, then convolve
    inv_col = _series_reciprocal(col)
    h = np.zeros_like(F)
    h[:, :n] = signal.fftconvolve(F[:, 1:], inv_col[None, :, None], mode="full", axes=1)[:, :n]
    return h


def _series_reciprocal(a: np.ndarray) -> np.ndarray:
    """First ``len(a)`` coefficients of ``1 / sum a_k z^k`` by Newton doubling."""
    n = len(a)
    r = np.array([1.0 / a[0]])
    m = 1
    while m < n:
        m = min(2 * m, n)
        corr = -signal.fftconvolve(a[:m], r)[:m]
        corr[0] += 2.0
        r = signal.fftconvolve(r, corr)[:m]
    return r


def girsanov_drift(sol: SolutionPath, cfg: SdeConfig, n_batches: int = 8, T: float | None = None,
                   method: str = "operator") -> GirsanovReport:
    """Girsanov shift for the drift ``b = g_J + u`` along the solution.

    The shift ``h`` of the driving Brownian motion solves ``c_H
    Gamma(H+1/2) I^{H+1/2} h = int_0^. b(X_s) ds``.  ``method="operator"``
    inverts this with the fractional derivative of order ``H + 1/2``
    (:func:`fbmsde.fraccalc.frac_op_negative` of ``I^{1/2-H}``);
    ``method="discrete"`` solves the sampler's own triangular system, so the
    reweighted law matches the sampled fBm without discretisation bias.
    Weights use the forward driver increments (left-point sums).  The
    Novikov statistic is the median over ``n_batches`` of batch means of
    ``exp(int |h|^2 / 2)``; ``unstable`` flags batch values that spread by
    more than a factor 2.
    """
    H = cfg.hurst.H
    if not H < 0.5:
        raise ValueError("Girsanov shift implemented for H < 1/2")
    if sol.noise.driver is None:
        raise ValueError("noise must carry its driver (moving-average sampler)")
    if method not in ("discrete", "operator"):
        raise ValueError(f"unknown method {method!r}")
    grid = cfg.grid
    dt = grid.dt
    k_end = grid.n_steps if T is None else int(round(T / dt))
    X = sol.X[:, : k_end + 1]
    g = cfg.effective_drift()
    b = np.zeros_like(X)
    if g is not None:
        b += g(X)
    if cfg.u is not None:
        b += cfg.u(X)
    if cfg.scheme == "averaged" and g is not None and not isinstance(g, ConstantDrift):
        warnings.warn("drift evaluated pointwise along the averaged-scheme path", stacklevel=2)
    # left-point rule, matching the Euler update of theta
    Fb = np.zeros_like(b)
    Fb[:, 1:] = np.cumsum(b[:, :-1] * dt, axis=1)
    if method == "discrete":
        scheme = sol.noise.driver.scheme
        if k_end != grid.n_steps:
            from .fbm_core import MvnScheme
            scheme = MvnScheme(cfg.hurst, TimeGrid(dt, k_end), 0.0)
        h = _discrete_shift(scheme, Fb)
    else:
        sub = TimeGrid(dt, k_end)
        h = girsanov_kappa(H) * frac_op_negative(SampledFunction(sub, Fb), -(H + 0.5), "integral").values
    with np.errstate(over="ignore"):
        cm = np.sum(np.sum(h[:, :-1] ** 2, axis=-1), axis=1) * dt
    dB = sol.noise.driver.dB[:, :k_end]
    logw = -np.sum(h[:, :-1] * dB, axis=(1, 2)) - 0.5 * cm
    P = len(cm)
    nb = max(1, min(n_batches, P))
    with np.errstate(over="ignore"):
        e = np.exp(0.5 * cm)
    batches = np.array([e[s].mean() for s in np.array_split(np.arange(P), nb)])
    stat = float(np.median(batches))
    finite = np.all(np.isfinite(batches))
    unstable = (not finite) or float(batches.max() / batches.min()) > 2.0
    if unstable:
        warnings.warn(f"Novikov statistic unstable over batches (median {stat:.4g})", stacklevel=2)
    return GirsanovReport(h, cm, stat, batches, bool(unstable), logw)
