"""Drifts of negative Besov-Hoelder regularity and the dissipative field.

The canonical drift is a lacunary (Weierstrass-type) series

    g_i(x) = sum_{j_min <= j <= J} a_j cos(2^j x_{e(j)} + phi_{j,i}),   a_j = A 2^{-alpha j},

where ``e(j) = j mod d`` cycles through the coordinates.  Each dyadic block
is one mode, so block sup-norms are exactly ``a_j`` and the Besov norm of
order ``alpha'`` is ``sup_j 2^{alpha' j} a_j``.

Heat smoothing with variance ``v`` multiplies mode ``j`` by ``exp(-v 4^j / 2)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

__all__ = [
    "BesovDrift",
    "ConstantDrift",
    "GriddedField",
    "DissipativeField",
    "ConfiningReport",
    "RegimeLabel",
    "make_lacunary_drift",
    "heat_mollify",
    "besov_norm_estimate",
    "classify_regime",
    "check_confining",
    "mollification_level",
    "drift_from_dict",
]


def _phases(seed: int, j: int, d: int) -> np.ndarray:
    return make_rng(seed, "besov_phase", j).uniform(0.0, 2.0 * math.pi, d)


@dataclass(frozen=True)
class BesovDrift:
    """Truncated lacunary series with blocks ``j_min..J``.

    ``heat_time`` records heat smoothing already applied (Gaussian variance).
    Instances are immutable; :meth:`heat_mollify`, :meth:`truncate` and
    :meth:`difference` return new objects sharing the phases.
    """

    alpha: float
    J: int
    A: float
    seed: int
    d: int = 1
    j_min: int = 0
    heat_time: float = 0.0
    phases: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.J < 0 or self.j_min < 0:
            raise ValueError("levels must be nonnegative")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.heat_time < 0:
            raise ValueError("heat_time must be >= 0")
        if self.phases is None:
            ph = tuple(tuple(float(v) for v in _phases(self.seed, j, self.d)) for j in range(self.J + 1))
            object.__setattr__(self, "phases", ph)
        elif len(self.phases) < self.J + 1:
            raise ValueError("phase table shorter than J+1")

    # -- mode data -----------------------------------------------------
    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.j_min, self.J + 1)

    @property
    def directions(self) -> np.ndarray:
        return self.levels % self.d

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 ** self.levels

    @property
    def block_amplitudes(self) -> np.ndarray:
        """``a_j`` before heat damping."""
        return self.A * 2.0 ** (-self.alpha * self.levels)

    @property
    def amplitudes(self) -> np.ndarray:
        """Per-mode amplitudes including the applied heat damping."""
        return self.block_amplitudes * np.exp(-0.5 * self.heat_time * 4.0**self.levels)

    @property
    def phase_table(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)[self.j_min : self.J + 1]  # (n_modes, d)

    # -- evaluation ----------------------------------------------------
    def _args(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"last axis must have length d={self.d}")
        # (..., n_modes, d_out)
        xs = x[..., self.directions] * self.frequencies
        return xs[..., :, None] + self.phase_table

    def _damp(self, var, shape_prefix) -> np.ndarray:
        amp = self.amplitudes
        if var is None:
            return amp
        var = np.asarray(var, dtype=float)
        return amp * np.exp(-0.5 * var[..., None] * 4.0**self.levels)

    def __call__(self, x, var=None) -> np.ndarray:
        """Evaluate at ``x`` (shape (..., d)); ``var`` adds heat smoothing per point."""
        arg = self._args(x)
        amp = self._damp(var, arg.shape[:-2])
        return np.einsum("...m,...mi->...i", np.broadcast_to(amp, arg.shape[:-1]), np.cos(arg))

    def gradient(self, x, var=None) -> np.ndarray:
        """Jacobian ``dg_i/dx_k``, shape (..., d, d)."""
        arg = self._args(x)
        amp = np.broadcast_to(self._damp(var, arg.shape[:-2]), arg.shape[:-1]) * self.frequencies
        per_mode = -amp[..., None] * np.sin(arg)  # (..., m, i)
        out = np.zeros(arg.shape[:-2] + (self.d, self.d))
        for k in range(self.d):
            sel = self.directions == k
            if np.any(sel):
                out[..., :, k] = per_mode[..., sel, :].sum(axis=-2)
        return out

    # -- derived drifts ------------------------------------------------
    def heat_mollify(self, t: float) -> "BesovDrift":
        if t < 0:
            raise ValueError("smoothing time must be >= 0")
        return dataclasses.replace(self, heat_time=self.heat_time + t)

    def truncate(self, J: int) -> "BesovDrift":
        if J > self.J:
            raise ValueError("cannot extend beyond the stored phases by truncation")
        return dataclasses.replace(self, J=J, phases=self.phases[: J + 1])

    def difference(self, other: "BesovDrift") -> "BesovDrift":
        """``self - other`` when ``other`` is a truncation of ``self``."""
        if (other.alpha, other.A, other.seed, other.d, other.j_min) != (self.alpha, self.A, self.seed, self.d, self.j_min):
            raise ValueError("difference defined only between truncations of one series")
        if other.J >= self.J:
            raise ValueError("other must be a strictly shorter truncation")
        return dataclasses.replace(self, j_min=other.J + 1)

    def block_norm(self, alpha_prime: float) -> float:
        """``sup_j 2^{alpha' j}`` x (block sup-norm), exact for this family."""
        if self.J < self.j_min:
            return 0.0
        return float(np.max(2.0 ** (alpha_prime * self.levels) * np.abs(self.amplitudes)))

    @property
    def sup_bound(self) -> float:
        return float(np.sum(np.abs(self.amplitudes)))

    @property
    def lipschitz_bound(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) * self.frequencies))

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kind": "lacunary",
            "alpha": self.alpha,
            "J": self.J,
            "A": self.A,
            "seed": self.seed,
            "d": self.d,
            "j_min": self.j_min,
            "heat_time": self.heat_time,
            "phases": [list(p) for p in self.phases],
            "directions": [int(j % self.d) for j in range(self.J + 1)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, dct: dict) -> "BesovDrift":
        d = int(dct.get("d", 1))
        dirs = dct.get("directions")
        if dirs is not None and list(dirs) != [j % d for j in range(len(dirs))]:
            raise ValueError("directions must cycle through coordinates")
        phases = dct.get("phases")
        phases = None if phases is None else tuple(tuple(float(v) for v in p) for p in phases)
        return cls(
            alpha=float(dct["alpha"]), J=int(dct["J"]), A=float(dct["A"]), seed=int(dct["seed"]), d=d,
            j_min=int(dct.get("j_min", 0)), heat_time=float(dct.get("heat_time", 0.0)), phases=phases,
        )

    @classmethod
    def from_json(cls, s: str) -> "BesovDrift":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class ConstantDrift:
    """Spatially constant drift; unaffected by heat smoothing."""

    value: tuple
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", tuple(float(v) for v in np.atleast_1d(self.value)))

    @property
    def d(self) -> int:
        return len(self.value)

    @property
    def J(self) -> int:
        return 0

    def __call__(self, x, var=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.value), x.shape).copy()

    def gradient(self, x, var=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.d,))

    def heat_mollify(self, t: float) -> "ConstantDrift":
        return self

    def block_norm(self, alpha_prime: float) -> float:
        return float(np.max(np.abs(self.value)))

    @property
    def sup_bound(self) -> float:
        return float(np.max(np.abs(self.value)))

    @property
    def lipschitz_bound(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": list(self.value), "alpha": self.alpha}


def drift_from_dict(dct: dict):
    kind = dct.get("kind", "lacunary")
    if kind == "lacunary":
        return BesovDrift.from_dict(dct)
    if kind == "constant":
        return ConstantDrift(dct["value"], float(dct.get("alpha", 0.0)))
    raise ValueError(f"unknown drift kind {kind!r}")


def make_lacunary_drift(alpha: float, J: int, A: float = 1.0, seed: int = 0, d: int = 1) -> BesovDrift:
    """Lacunary drift truncated at level ``J``; phases depend only on ``(seed, j)``."""
    if J < 0:
        raise ValueError("J must be >= 0")
    return BesovDrift(alpha=float(alpha), J=int(J), A=float(A), seed=int(seed), d=int(d))


def mollification_level(dt: float, H: float) -> int:
    """``ceil(H log2(1/dt))``: resolve frequencies up to ``dt^{-H}``."""
    return max(0, int(math.ceil(H * math.log2(1.0 / dt) - 1e-12)))


@dataclass(frozen=True)
class GriddedField:
    """Periodic field sampled on ``n`` equispaced points of ``[0, period)`` (1-D domain)."""

    period: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def x(self) -> np.ndarray:
        n = self.values.shape[0]
        return np.arange(n) * (self.period / n)

    def heat_mollify(self, t: float) -> "GriddedField":
        if t < 0:
            raise ValueError("smoothing time must be >= 0")
        n = self.values.shape[0]
        k = 2 * math.pi * np.fft.rfftfreq(n, d=self.period / n)
        shape = (-1,) + (1,) * (self.values.ndim - 1)
        coef = np.fft.rfft(self.values, axis=0) * np.exp(-0.5 * t * k**2).reshape(shape)
        return GriddedField(self.period, np.fft.irfft(coef, n=n, axis=0))

    def __call__(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), self.period)
        xp = np.concatenate([self.x, [self.period]])
        vp = np.concatenate([self.values, self.values[:1]], axis=0)
        if vp.ndim == 1:
            return np.interp(x, xp, vp)
        return np.stack([np.interp(x, xp, vp[:, i]) for i in range(vp.shape[1])], axis=-1)


def heat_mollify(g, t: float):
    """Heat smoothing with Gaussian variance ``t``.

    Lacunary drifts are damped mode by mode (``exp(-t 4^j / 2)``); gridded
    periodic fields are smoothed spectrally; constants are unchanged.
    """
    if not t >= 0:
        raise ValueError("t must be >= 0")
    return g.heat_mollify(t)


def _sample_points(d: int, n: int, period: float = 2 * math.pi) -> np.ndarray:
    # a line with rationally independent slopes covers the torus densely
    s = np.linspace(0.0, period, n, endpoint=False)
    slopes = np.sqrt(np.array([1.0, 2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0][:d] if d <= 8 else np.arange(1, d + 1)))
    return np.outer(s, slopes) if d > 1 else s[:, None]


def besov_norm_estimate(g, alpha: float, t_range, n_samples: int = 4096) -> float:
    """Thermic estimate ``sup_t t^{-alpha/2} ||G_t g||_inf`` over ``t_range``.

    The sup-norm is taken over sample points (an equispaced grid for gridded
    fields, a dense line on the torus otherwise).
    """
    if not alpha < 0:
        raise ValueError("alpha must be negative")
    best = 0.0
    if isinstance(g, GriddedField):
        for t in np.atleast_1d(t_range):
            best = max(best, t ** (-alpha / 2) * float(np.max(np.abs(g.heat_mollify(t).values))))
        return best
    d = getattr(g, "d", 1)
    pts = _sample_points(d, n_samples)
    if isinstance(g, BesovDrift):
        # resolve the highest retained frequency
        n_need = int(8 * 2 ** g.J)
        if n_need > n_samples and d == 1:
            pts = _sample_points(1, min(n_need, 2**20))
    for t in np.atleast_1d(t_range):
        vals = heat_mollify(g, float(t))(pts)
        best = max(best, t ** (-alpha / 2) * float(np.max(np.abs(vals))))
    return best


# --------------------------------------------------------------------------
# regime classification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeLabel:
    scaling: str
    wellposedness: str

    def as_dict(self) -> dict:
        return {"scaling": self.scaling, "wellposedness": self.wellposedness}


_WP_ORDER = {"none": 0, "weak": 1, "strong": 2}
_SC_ORDER = {"supercritical": 0, "critical": 1, "subcritical": 2}


def classify_regime(alpha: float, H: float, tol: float = 1e-12) -> RegimeLabel:
    """Scaling class from ``alpha`` vs ``1 - 1/H``; well-posedness from
    ``alpha > 1 - 1/(2H)`` (strong) or ``alpha > 1/2 - 1/(2H)`` (weak)."""
    if not 0.0 < H < 1.0:
        raise ValueError("H must lie in (0,1)")
    crit = 1.0 - 1.0 / H
    if abs(alpha - crit) <= tol * max(1.0, abs(crit)):
        scaling = "critical"
    elif alpha > crit:
        scaling = "subcritical"
    else:
        scaling = "supercritical"
    if alpha > 1.0 - 1.0 / (2 * H) + tol:
        wp = "strong"
    elif alpha > 0.5 - 1.0 / (2 * H) + tol:
        wp = "weak"
    else:
        wp = "none"
    return RegimeLabel(scaling, wp)


def regime_rank(label: RegimeLabel) -> tuple[int, int]:
    return _SC_ORDER[label.scaling], _WP_ORDER[label.wellposedness]


# --------------------------------------------------------------------------
# dissipative field
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipativeField:
    """``u(x) = -lam x + pert sin(x)`` (coordinatewise sine), or a custom map.

    ``fn``/``jac`` override the formula; ``lam`` is then the claimed rate.
    """

    lam: float
    pert: float = 0.0
    fn: object = field(default=None, compare=False, repr=False)
    jac: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.fn is None and not self.lam > 0:
            raise ValueError("lam must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(x), dtype=float)
        out = -self.lam * x
        if self.pert:
            out = out + self.pert * np.sin(x)
        return out

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        if self.fn is not None:
            h = 1e-6 * np.maximum(1.0, np.abs(x))
            cols = []
            for k in range(d):
                e = np.zeros(x.shape)
                e[..., k] = h[..., k]
                cols.append((self(x + e) - self(x - e)) / (2 * h[..., k : k + 1]))
            return np.stack(cols, axis=-1)
        diag = -self.lam + self.pert * np.cos(x) if self.pert else np.full(x.shape, -self.lam)
        return diag[..., :, None] * np.eye(d)

    @property
    def is_linear(self) -> bool:
        return self.fn is None and self.pert == 0.0

    @property
    def monotonicity_rate(self) -> float:
        """Guaranteed rate in <u(x)-u(y), x-y> <= -rate |x-y|^2."""
        return self.lam - abs(self.pert)

    @property
    def lipschitz(self) -> float:
        return self.lam + abs(self.pert)

    def to_dict(self) -> dict:
        if self.fn is not None:
            raise ValueError("custom fields are not serialisable")
        return {"lam": self.lam, "pert": self.pert}


@dataclass
class ConfiningReport:
    passed: bool
    single_constant_holds: bool
    lam_claimed: float
    monotonicity_rate: float
    lipschitz: float
    worst_monotonicity_margin: float
    worst_gradient_margin: float
    witness: tuple | None = None
    message: str = ""

    def as_dict(self) -> dict:
        dct = dataclasses.asdict(self)
        if self.witness is not None:
            dct["witness"] = [np.asarray(w).tolist() for w in self.witness]
        return dct


def check_confining(u: DissipativeField, sample_count: int = 10000, box: float = 10.0,
                    rng: np.random.Generator | None = None, d: int = 1) -> ConfiningReport:
    """Check dissipativity and the gradient bound on random point pairs.

    Two constants are tested separately: the monotonicity rate
    ``m = lam - |pert|`` in ``<u(x)-u(y), x-y> <= -m|x-y|^2`` and the
    Lipschitz bound ``L = lam + |pert|`` on ``grad u``.  The check passes
    when ``m > 0`` holds on all pairs and ``||grad u|| <= L``;
    ``single_constant_holds`` is true when both hold with the single constant
    ``lam`` (only for unperturbed fields).  Margins are normalised by
    ``|x-y|^2`` (monotonicity) or reported as ``L - ||grad u||``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = rng.uniform(-box, box, (sample_count, d))
    y = rng.uniform(-box, box, (sample_count, d))
    diff = x - y
    nrm2 = np.sum(diff**2, axis=-1)
    ok = nrm2 > 0
    inner = np.sum((u(x) - u(y)) * diff, axis=-1)
    claimed_rate = u.monotonicity_rate if u.fn is None else u.lam
    L = u.lipschitz if u.fn is None else abs(u.lam)
    ratio = np.where(ok, inner / np.where(ok, nrm2, 1.0), -np.inf)
    mono_margin = -claimed_rate - ratio  # >= 0 where the inequality holds
    grads = u.gradient(x)
    gnorm = np.linalg.norm(grads, ord=2, axis=(-2, -1))
    grad_margin = L - gnorm
    worst_m = float(np.min(mono_margin[ok]))
    worst_g = float(np.min(grad_margin))
    tol = 1e-10 * max(1.0, abs(u.lam))
    dissipative = claimed_rate > 0 and worst_m >= -tol
    passed = dissipative and worst_g >= -tol
    # single-constant form: <.,.> <= -lam|x-y|^2 and ||grad u|| <= lam
    single_constant = bool(np.all(ratio[ok] <= -u.lam + tol) and np.all(gnorm <= abs(u.lam) + tol))
    witness, msg = None, "ok"
    if not dissipative:
        k = int(np.argmin(np.where(ok, mono_margin, np.inf)))
        witness = (x[k], y[k])
        msg = f"monotonicity violated: <u(x)-u(y),x-y>/|x-y|^2 = {ratio[k]:.6g} > {-claimed_rate:.6g}"
    elif not passed:
        k = int(np.argmin(grad_margin))
        witness = (x[k], x[k])
        msg = f"gradient bound violated: ||grad u|| = {gnorm[k]:.6g} > {L:.6g}"
    return ConfiningReport(bool(passed), single_constant, float(u.lam), float(claimed_rate), float(L),
                           worst_m, worst_g, witness, msg)
