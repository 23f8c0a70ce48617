"""Fractional Brownian motion: covariance, samplers, conditional laws.

Two samplers are provided.

* :func:`sample_fbm_exact` factorises the covariance on the grid nodes
  (dense Cholesky).  Exact in law, limited to a few thousand nodes.
* :func:`sample_fbm_mvn` discretises the two-sided moving-average
  (Mandelbrot--van Ness) representation driven by white noise.  It keeps the
  driving increments so that conditional means given the driver's past can be
  reconstructed, which is what the averaged-field solver needs.

Array convention: path values have shape ``(n_paths, n_nodes, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, signal, special

__all__ = [
    "TimeGrid",
    "HurstParams",
    "FbmPath",
    "MvnDriver",
    "MvnScheme",
    "FactorizationError",
    "mvn_constant",
    "mvn_constant_closed_form",
    "fbm_covariance",
    "fbm_covariance_matrix",
    "sample_fbm_exact",
    "sample_fbm_mvn",
    "conditional_mean_var",
    "exp_kernel_integral",
    "MAX_EXACT_NODES",
]

MAX_EXACT_NODES = 2**13


class FactorizationError(RuntimeError):
    """Covariance matrix could not be factorised even after jitter escalation."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t_start + k*dt`` for ``k = 0..n_steps``."""

    dt: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def on_interval(cls, t0: float, t1: float, n_steps: int) -> "TimeGrid":
        if not t1 > t0:
            raise ValueError("need t1 > t0")
        return cls(dt=(t1 - t0) / n_steps, n_steps=n_steps, t_start=t0)

    @property
    def nodes(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * self.n_steps

    @property
    def length(self) -> float:
        return self.dt * self.n_steps

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the node equal to ``t`` (raises if ``t`` is not a node)."""
        k = int(round((t - self.t_start) / self.dt))
        if k < 0 or k > self.n_steps or abs(self.t_start + k * self.dt - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a grid node")
        return k


def _mvn_variance_integral(H: float) -> float:
    # int_0^inf ((1+r)^{H-1/2} - r^{H-1/2})^2 dr, split where the integrand changes character
    a = H - 0.5
    fn = lambda r: ((1.0 + r) ** a - r**a) ** 2
    v1, _ = integrate.quad(fn, 0.0, 1.0, limit=200, epsabs=0, epsrel=1e-11)
    # r = 1/u on [1, inf): integrand u^{-2a-2} ((1+u)^a - 1)^2, with expm1/log1p against cancellation
    tail = lambda u: u ** (-2 * a - 2) * np.expm1(a * np.log1p(u)) ** 2
    v2, _ = integrate.quad(tail, 0.0, 1.0, limit=200, epsabs=0, epsrel=1e-11)
    return v1 + v2


@lru_cache(maxsize=None)
def mvn_constant(H: float) -> float:
    """Normalising constant of the moving-average representation.

    Chosen so that ``Var W_1 = 1``; obtained by quadrature of the two kernel
    pieces and cached per ``H``.
    """
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0,1), got {H}")
    if H == 0.5:
        return 1.0
    return 1.0 / math.sqrt(1.0 / (2.0 * H) + _mvn_variance_integral(H))


def mvn_constant_closed_form(H: float) -> float:
    """``sqrt(Gamma(2H+1) sin(pi H)) / Gamma(H+1/2)``; used as a cross-check."""
    return math.sqrt(special.gamma(2 * H + 1) * math.sin(math.pi * H)) / special.gamma(H + 0.5)


@dataclass(frozen=True)
class HurstParams:
    """Hurst exponent and dimension, with the derived constants.

    ``c_tilde_H = c_H**2 / (2H)`` is the local-nondeterminism constant: the
    conditional variance of ``W_t`` given the driver up to ``s`` is
    ``c_tilde_H * (t-s)**(2H)``.
    """

    H: float
    d: int = 1

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"H must lie in (0,1), got {self.H}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")

    @property
    def c_H(self) -> float:
        return mvn_constant(float(self.H))

    @property
    def c_tilde_H(self) -> float:
        return self.c_H**2 / (2.0 * self.H)


def fbm_covariance(s, t, p: HurstParams):
    """Per-coordinate covariance ``(|t|^2H + |s|^2H - |t-s|^2H) / 2``.

    The full covariance matrix is this scalar times the identity.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * p.H
    out = 0.5 * (np.abs(t) ** h2 + np.abs(s) ** h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def fbm_covariance_matrix(times, p: HurstParams) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return fbm_covariance(times[:, None], times[None, :], p)


@dataclass
class FbmPath:
    """Sampled fBm.

    Attributes
    ----------
    grid : TimeGrid
    values : ndarray, shape (n_paths, n_nodes, d)
    params : HurstParams
    driver : MvnDriver or None
        White-noise data the values were built from (moving-average sampler).
    past : object or None
        Past segment the path was conditioned on, if any.
    offset : ndarray or None
        Deterministic part included in ``values`` (e.g. the conditional mean
        given a past path).
    """

    grid: TimeGrid
    values: np.ndarray
    params: HurstParams
    driver: "MvnDriver | None" = None
    past: object = None
    offset: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=1)


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    scale = float(np.mean(np.diag(cov))) or 1.0
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    for jit in (1e-12, 1e-11, 1e-10, 1e-9, 1e-8):
        try:
            return np.linalg.cholesky(cov + jit * scale * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        "covariance not numerically positive definite after jitter 1e-8; "
        "use a coarser grid or the moving-average sampler"
    )


def sample_fbm_exact(p: HurstParams, g: TimeGrid, rng: np.random.Generator, n_paths: int = 1) -> FbmPath:
    """Exact fBm on the grid nodes by Cholesky factorisation.

    Nodes at ``t = 0`` carry zero variance and are set to 0.  At most
    :data:`MAX_EXACT_NODES` nodes are supported.
    """
    if g.n_nodes > MAX_EXACT_NODES:
        raise ValueError(f"exact sampler limited to {MAX_EXACT_NODES} nodes, got {g.n_nodes}")
    t = g.nodes
    live = np.abs(t) > 0
    L = _cholesky_with_jitter(fbm_covariance_matrix(t[live], p))
    z = rng.standard_normal((n_paths, p.d, int(live.sum())))
    vals = np.zeros((n_paths, g.n_nodes, p.d))
    vals[:, live, :] = np.einsum("ij,pdj->pid", L, z)
    return FbmPath(grid=g, values=vals, params=p)


# --------------------------------------------------------------------------
# moving-average (two-sided) sampler
# --------------------------------------------------------------------------


@dataclass
class MvnDriver:
    """White-noise data of one batch of moving-average paths.

    Forward cell ``j`` is ``[t_j, t_{j+1}]``; ``dB[:, j]`` is its Brownian
    increment and ``Z[:, j] = int_cell (t_{j+1}-r)^{H-1/2} dB_r``.  Past
    cells are uniform (width ``dt``) down to ``-n_unif*dt`` and geometric
    beyond, truncated at ``-past_horizon``; ``xi`` drives the analytic tail.
    """

    scheme: "MvnScheme"
    dB: np.ndarray  # (P, n, d)
    Z: np.ndarray  # (P, n, d)
    dB_past: np.ndarray  # (P, n_unif, d), cell i = [-(i+1)dt, -i dt]
    Z_past: np.ndarray  # (P, d), int_{-dt}^0 (-r)^{H-1/2} dB_r
    dB_geo: np.ndarray  # (P, m_geo, d)
    xi: np.ndarray  # (P, d)

    @property
    def n_paths(self) -> int:
        return self.dB.shape[0]


def _cell_pair_factor(H: float, dt: float) -> tuple[float, float, float]:
    """Coefficients so that ``dB = a*x1``, ``Z = b*x1 + c*x2`` for iid N(0,1)."""
    var_b = dt
    var_z = dt ** (2 * H) / (2 * H)
    cov = dt ** (H + 0.5) / (H + 0.5)
    a = math.sqrt(var_b)
    b = cov / a
    c = math.sqrt(max(var_z - b * b, 0.0))
    return a, b, c


class MvnScheme:
    """Discretised moving-average representation on a grid starting at 0.

    Within each cell adjacent to the evaluation time the singular kernel is
    integrated exactly against the white noise (the ``Z`` variables); other
    cells use the cell average of the kernel, which is the best linear
    predictor given the cell increment.

    Parameters
    ----------
    params : HurstParams
    grid : TimeGrid
        Must start at 0.
    past_horizon : float, optional
        Truncation depth of the past integral.  Defaults to 100 times the grid
        length; 0 gives the one-sided (Riemann--Liouville) process.
    geo_ratio : float
        Growth factor of past cell widths beyond the uniform zone.
    """

    def __init__(self, params: HurstParams, grid: TimeGrid, past_horizon: float | None = None,
                 geo_ratio: float = 1.05):
        if grid.t_start != 0.0:
            raise ValueError("moving-average sampler requires t_start = 0")
        if past_horizon is None:
            past_horizon = 100.0 * grid.length
        if past_horizon < 0:
            raise ValueError("past_horizon must be >= 0")
        self.params = params
        self.grid = grid
        self.past_horizon = float(past_horizon)
        self.geo_ratio = geo_ratio
        H, dt, n = params.H, grid.dt, grid.n_steps
        self.H, self.dt, self.n = H, dt, n
        self.c_H = params.c_H
        self.p = H + 0.5
        if self.past_horizon > 0:
            self.n_unif = int(min(n, max(1, round(self.past_horizon / dt))))
        else:
            self.n_unif = 0
        depth = self.n_unif * dt
        edges = [depth]
        while edges[-1] < self.past_horizon * (1 - 1e-12):
            edges.append(min(edges[-1] * geo_ratio, self.past_horizon))
        self.geo_edges = np.asarray(edges)  # distances from 0, increasing
        self.m_geo = len(edges) - 1
        self.cell_factor = _cell_pair_factor(H, dt)
        self.tail_var = (self.past_horizon ** (2 * H - 2) / (2 - 2 * H)) if self.past_horizon > 0 else 0.0
        self._reg_cache: dict[float, np.ndarray] = {}

    # ---- kernel moments -------------------------------------------------
    def avg_weights(self, ell: np.ndarray, theta: float = 0.0) -> np.ndarray:
        """Cell average of ``(x)^{H-1/2}`` over ``x in [(ell-1+theta)dt, (ell+theta)dt]``."""
        ell = np.asarray(ell, dtype=float)
        p = self.p
        return self.dt ** (self.H - 0.5) * ((ell + theta) ** p - (ell - 1 + theta) ** p) / p

    def _geo_weights(self, r: np.ndarray) -> np.ndarray:
        """Past-geometric-cell weights for evaluation times ``r >= 0``; shape (len(r), m_geo)."""
        if self.m_geo == 0:
            return np.zeros((len(r), 0))
        a = self.geo_edges[:-1][None, :]
        b = self.geo_edges[1:][None, :]
        r = np.asarray(r, dtype=float)[:, None]
        p = self.p
        fwd = ((r + b) ** p - (r + a) ** p) / (p * (b - a))
        back = (b**p - a**p) / (p * (b - a))
        return fwd - back

    def last_cell_regression(self, theta: float) -> np.ndarray:
        """Coefficients of ``(dB, Z)`` for ``E[int_cell (r-q)^{H-1/2} dB_q | dB, Z]``.

        ``r`` lies ``theta*dt`` past the cell's right end.
        """
        key = float(theta)
        if key in self._reg_cache:
            return self._reg_cache[key]
        H, dt = self.H, self.dt
        if theta == 0.0:
            beta = np.array([0.0, 1.0])
        else:
            S = np.array([[dt, dt ** (H + 0.5) / (H + 0.5)],
                          [dt ** (H + 0.5) / (H + 0.5), dt ** (2 * H) / (2 * H)]])
            cz, _ = integrate.quad(lambda v: (theta + v) ** (H - 0.5) * v ** (H - 0.5), 0.0, 1.0,
                                   limit=200, epsabs=0, epsrel=1e-12)
            c = np.array([dt * float(self.avg_weights(1.0, theta)), dt ** (2 * H) * cz])
            beta = np.linalg.pinv(S, rcond=1e-12) @ c
        self._reg_cache[key] = beta
        return beta

    # ---- sampling ---------------------------------------------------------
    def draw_normals(self, rng: np.random.Generator, n_paths: int) -> dict[str, np.ndarray]:
        d = self.params.d
        return {
            "fwd": rng.standard_normal((n_paths, self.n, d, 2)),
            "past": rng.standard_normal((n_paths, self.n_unif, d)),
            "past_z": rng.standard_normal((n_paths, d)),
            "geo": rng.standard_normal((n_paths, self.m_geo, d)),
            "tail": rng.standard_normal((n_paths, d)),
        }

    def driver_from_normals(self, z: dict[str, np.ndarray]) -> MvnDriver:
        a, b, c = self.cell_factor
        x1, x2 = z["fwd"][..., 0], z["fwd"][..., 1]
        dB = a * x1
        Z = b * x1 + c * x2
        if self.n_unif > 0:
            dB_past = a * z["past"]
            Z_past = b * z["past"][:, 0, :] + c * z["past_z"]
        else:
            dB_past = z["past"] * a
            Z_past = np.zeros_like(z["past_z"])
        widths = np.diff(self.geo_edges)
        dB_geo = z["geo"] * np.sqrt(widths)[None, :, None]
        xi = z["tail"] * math.sqrt(self.tail_var)
        return MvnDriver(self, dB, Z, dB_past, Z_past, dB_geo, xi)

    def sample_driver(self, rng: np.random.Generator, n_paths: int = 1) -> MvnDriver:
        return self.driver_from_normals(self.draw_normals(rng, n_paths))

    # ---- path reconstruction ---------------------------------------------
    def _hankel(self, x: np.ndarray, wvec: np.ndarray, n_out: int) -> np.ndarray:
        """``out[k] = sum_i wvec[k+i] x[i]`` for ``k < n_out`` along axis 1."""
        m = x.shape[1]
        if m == 0:
            return np.zeros((x.shape[0], n_out, x.shape[2]))
        xr = x[:, ::-1, :]
        full = signal.fftconvolve(xr, wvec[None, : n_out + m - 1, None], mode="full", axes=1)
        return full[:, m - 1 : m - 1 + n_out, :]

    def _past_part(self, drv: MvnDriver, theta: float, ks: np.ndarray) -> np.ndarray:
        """Past-measurable part at ``r = (k+theta)dt`` for integer ``ks`` (contiguous from 0)."""
        n_out = len(ks)
        c_H = self.c_H
        P, d = drv.n_paths, self.params.d
        out = np.zeros((P, n_out, d))
        if self.n_unif > 0:
            # uniform zone: kernel (r-q) on cell i has lag k+i+1
            wvec = self.avg_weights(np.arange(1, n_out + self.n_unif + 1), theta)
            hk = self._hankel(drv.dB_past, wvec, n_out)
            back = self.avg_weights(np.arange(2, self.n_unif + 1), 0.0)
            const = np.einsum("i,pid->pd", back, drv.dB_past[:, 1:, :]) + drv.Z_past
            out += c_H * (hk - const[:, None, :])
        r = (ks + theta) * self.dt
        if self.m_geo > 0:
            out += c_H * np.einsum("ki,pid->pkd", self._geo_weights(r), drv.dB_geo)
        if self.tail_var > 0:
            out += (c_H * (self.H - 0.5)) * r[None, :, None] * drv.xi[:, None, :]
        return out

    def values(self, drv: MvnDriver) -> np.ndarray:
        """Path values at the grid nodes, shape (P, n+1, d)."""
        n, c_H = self.n, self.c_H
        P, d = drv.n_paths, self.params.d
        vals = np.zeros((P, n + 1, d))
        ker = np.zeros(n + 1)
        if n >= 2:
            ker[2:] = self.avg_weights(np.arange(2, n + 1))
        conv = signal.fftconvolve(drv.dB, ker[None, :, None], mode="full", axes=1)[:, : n + 1, :]
        vals[:, 1:, :] = c_H * (drv.Z + conv[:, 1:, :])
        past = self._past_part(drv, 0.0, np.arange(n + 1))
        vals[:, 1:, :] += past[:, 1:, :]
        return vals

    def past_mean(self, drv: MvnDriver, r: np.ndarray) -> np.ndarray:
        """``E[W_r | driver on (-inf, 0]]`` at arbitrary ``r >= 0``; shape (P, len(r), d)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        c_H = self.c_H
        P, d = drv.n_paths, self.params.d
        out = np.zeros((P, len(r), d))
        if self.n_unif > 0:
            i = np.arange(self.n_unif)
            lo = r[:, None] + i[None, :] * self.dt
            W = ((lo + self.dt) ** self.p - lo**self.p) / (self.p * self.dt)
            back = self.avg_weights(np.arange(2, self.n_unif + 1), 0.0)
            const = np.einsum("i,pid->pd", back, drv.dB_past[:, 1:, :]) + drv.Z_past
            out += c_H * (np.einsum("ki,pid->pkd", W, drv.dB_past) - const[:, None, :])
        if self.m_geo > 0:
            out += c_H * np.einsum("ki,pid->pkd", self._geo_weights(r), drv.dB_geo)
        if self.tail_var > 0:
            out += (c_H * (self.H - 0.5)) * r[None, :, None] * drv.xi[:, None, :]
        out[:, r == 0.0, :] = 0.0
        return out

    def cond_mean_at(self, drv: MvnDriver, k: int, r) -> np.ndarray:
        """``E[W_r | driver up to t_k]`` for arbitrary ``r >= t_k``; shape (P, len(r), d)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        tk = k * self.dt
        if np.any(r < tk - 1e-12 * max(1.0, tk)):
            raise ValueError("conditional mean requires r >= t_k")
        out = self.past_mean(drv, r)
        if k == 0:
            return out
        c_H, dt, p = self.c_H, self.dt, self.p
        if k >= 2:
            tj = np.arange(k - 1) * dt
            a = np.maximum(r[:, None] - tj[None, :], 0.0)
            b = np.maximum(r[:, None] - tj[None, :] - dt, 0.0)
            W = (a**p - b**p) / (p * dt)
            out += c_H * np.einsum("rj,pjd->prd", W, drv.dB[:, : k - 1, :])
        for i, ri in enumerate(r):
            beta = self.last_cell_regression(max((ri - tk) / dt, 0.0))
            out[:, i, :] += c_H * (beta[0] * drv.dB[:, k - 1, :] + beta[1] * drv.Z[:, k - 1, :])
        return out

    def cond_mean_curves(self, drv: MvnDriver, thetas) -> np.ndarray:
        """``E[W_{(k+theta)dt} | driver up to t_k]`` for all steps ``k = 0..n-1``.

        Returns shape (P, n, len(thetas), d).
        """
        thetas = np.asarray(thetas, dtype=float)
        n, c_H = self.n, self.c_H
        P, d = drv.n_paths, self.params.d
        out = np.empty((P, n, len(thetas), d))
        ks = np.arange(n)
        for q, th in enumerate(thetas):
            ker = np.zeros(n)
            if n >= 3:
                ker[2:] = self.avg_weights(np.arange(2, n), th)
            conv = signal.fftconvolve(drv.dB, ker[None, :, None], mode="full", axes=1)[:, :n, :]
            cur = c_H * conv
            beta = self.last_cell_regression(th)
            cur[:, 1:, :] += c_H * (beta[0] * drv.dB[:, :-1, :] + beta[1] * drv.Z[:, :-1, :])
            cur += self._past_part(drv, th, ks)
            out[:, :, q, :] = cur
        return out

    # ---- diagnostics --------------------------------------------------------
    def implied_covariance(self) -> np.ndarray:
        """Exact covariance of the discretised values (per coordinate), shape (n+1, n+1)."""
        if self.params.d != 1:
            return MvnScheme(HurstParams(self.H, 1), self.grid, self.past_horizon, self.geo_ratio).implied_covariance()
        sizes = {"fwd": self.n * 2, "past": self.n_unif, "past_z": 1, "geo": self.m_geo, "tail": 1}
        N = sum(sizes.values())
        z = {k: np.zeros((N,) + s) for k, s in
             {"fwd": (self.n, 1, 2), "past": (self.n_unif, 1), "past_z": (1,), "geo": (self.m_geo, 1), "tail": (1,)}.items()}
        col = 0
        for j in range(self.n):
            for c in range(2):
                z["fwd"][col, j, 0, c] = 1.0
                col += 1
        for i in range(self.n_unif):
            z["past"][col, i, 0] = 1.0
            col += 1
        z["past_z"][col, 0] = 1.0
        col += 1
        for i in range(self.m_geo):
            z["geo"][col, i, 0] = 1.0
            col += 1
        z["tail"][col, 0] = 1.0
        M = self.values(self.driver_from_normals(z))[:, :, 0]  # (N, n+1)
        return M.T @ M

    def tail_bound(self, t_max: float | None = None) -> float:
        """Bound on the covariance error caused by truncating the past.

        Uses the exact variance of the neglected tail at ``t_max`` and the
        variance left after the linear tail correction.
        """
        if self.past_horizon == 0:
            return 0.0
        t = self.grid.length if t_max is None else t_max
        H, L, a = self.H, self.past_horizon, self.H - 0.5
        full, _ = integrate.quad(lambda u: ((t + u) ** a - u**a) ** 2, L, np.inf, limit=200)
        res, _ = integrate.quad(lambda u: ((t + u) ** a - u**a - a * t * u ** (a - 1)) ** 2, L, np.inf, limit=200)
        c2 = self.c_H**2
        return c2 * (res + 2.0 * math.sqrt(res * full))


def sample_fbm_mvn(p: HurstParams, g: TimeGrid, past_horizon: float | None, rng: np.random.Generator,
                   n_paths: int = 1) -> FbmPath:
    """Sample fBm from the discretised moving-average representation.

    ``past_horizon = 0`` gives the Riemann--Liouville part only; ``None``
    selects the default horizon (100 grid lengths).
    """
    scheme = MvnScheme(p, g, past_horizon)
    drv = scheme.sample_driver(rng, n_paths)
    return FbmPath(grid=g, values=scheme.values(drv), params=p, driver=drv)


def conditional_mean_var(path: FbmPath, s: float, t: float, psi=None) -> tuple[np.ndarray, float]:
    """Conditional law of ``W_t`` given the driver up to the node ``s``.

    Returns the mean, shape (n_paths, d), and the per-coordinate variance
    ``c_tilde_H * (t-s)**(2H)``, which is exact and does not depend on the
    observed path.  ``psi`` (callable) adds a deterministic perturbation to
    the mean only.
    """
    if path.driver is None:
        raise TypeError("conditional_mean_var needs a path that carries its driver")
    if not t > s:
        raise ValueError("need t > s")
    scheme = path.driver.scheme
    k = path.grid.index_of(s)
    mean = scheme.cond_mean_at(path.driver, k, [t])[:, 0, :]
    if psi is not None:
        mean = mean + np.asarray(psi(t), dtype=float)
    var = path.params.c_tilde_H * (t - s) ** (2 * path.params.H)
    return mean, float(var)


def exp_kernel_integral(values: np.ndarray, grid: TimeGrid, lam: float, t: float | None = None) -> np.ndarray:
    """``int_0^t exp(-lam (t-r)) dX_r`` for a sampled path.

    Equal to ``exp(-lam t)(X_t - X_0) + lam int_0^t exp(-lam(t-r))(X_t - X_r) dr``.
    For the piecewise-linear interpolant of the samples this is evaluated
    exactly by the recursion
    ``Y_{k+1} = exp(-lam dt) Y_k + (X_{k+1}-X_k)(1-exp(-lam dt))/(lam dt)``.

    ``values`` has the time axis at position -2 if 2-D or more, else 0.
    Returns all nodes, or the node ``t`` if given.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    x = np.asarray(values, dtype=float)
    axis = 0 if x.ndim == 1 else x.ndim - 2
    x = np.moveaxis(x, axis, 0)
    dx = np.diff(x, axis=0)
    decay = math.exp(-lam * grid.dt)
    gain = -math.expm1(-lam * grid.dt) / (lam * grid.dt)
    y = np.zeros_like(x)
    y[1:] = signal.lfilter([gain], [1.0, -decay], dx, axis=0)
    y = np.moveaxis(y, 0, axis)
    if t is None:
        return y
    k = grid.index_of(t)
    return np.take(y, k, axis=axis)
