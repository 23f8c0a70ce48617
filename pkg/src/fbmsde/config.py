"""Strict JSON experiment configuration.

A config is a JSON object with an explicit ``schema_version``.  Every key is
declared below with its type and default; unknown keys are rejected and the
error names the offending key path (``grid.dtt``).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .besov_drift import DissipativeField, drift_from_dict
from .fbm_core import FbmPath, HurstParams, TimeGrid, sample_fbm_exact, sample_fbm_mvn
from .rng import make_rng
from .sde_solver import SdeConfig

__all__ = ["SCHEMA_VERSION", "ConfigError", "validate_config", "load_config", "build_sde_config", "sample_noise",
           "default_config"]

SCHEMA_VERSION = 1
_REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
        self.message = message

    def as_dict(self) -> dict:
        return {"error": "validation", "key": self.key, "message": self.message}


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _vec(v):
    return _num(v) or (isinstance(v, list) and len(v) > 0 and all(_num(x) for x in v))


# key -> (predicate, type description, default)
_FIELDS = {
    "": {
        "schema_version": (_int, "integer", _REQUIRED),
        "seed": (_int, "integer", 0),
        "x0": (_vec, "number or list of numbers", 0.0),
        "scheme": (lambda v: v in ("euler", "averaged"), "'euler' or 'averaged'", "euler"),
        "J": (lambda v: v is None or (_int(v) and v >= 0), "null or integer >= 0", None),
        "n_quad": (lambda v: _int(v) and v >= 1, "integer >= 1", 8),
    },
    "hurst": {
        "H": (lambda v: _num(v) and 0 < v < 1, "number in (0, 1)", _REQUIRED),
        "d": (lambda v: _int(v) and v >= 1, "integer >= 1", 1),
    },
    "grid": {
        "dt": (lambda v: _num(v) and v > 0, "positive number", _REQUIRED),
        "n_steps": (lambda v: _int(v) and v >= 1, "integer >= 1", _REQUIRED),
    },
    "noise": {
        "sampler": (lambda v: v in ("mvn", "exact"), "'mvn' or 'exact'", "mvn"),
        "n_paths": (lambda v: _int(v) and v >= 1, "integer >= 1", 64),
        "past_horizon": (lambda v: v is None or (_num(v) and v >= 0), "null or number >= 0", None),
        "chunk": (lambda v: _int(v) and v >= 1, "integer >= 1", 64),
    },
    "drift": {
        "kind": (lambda v: v in ("lacunary", "constant"), "'lacunary' or 'constant'", "lacunary"),
        "alpha": (_num, "number", 0.0),
        "J": (lambda v: _int(v) and v >= 0, "integer >= 0", 10),
        "A": (_num, "number", 1.0),
        "seed": (_int, "integer", 0),
        "value": (_vec, "number or list of numbers", 0.0),
    },
    "u": {
        "lam": (lambda v: _num(v) and v > 0, "positive number", _REQUIRED),
        "pert": (_num, "number", 0.0),
    },
    "ergodic": {
        "T_total": (lambda v: _num(v) and v > 0, "positive number", 50.0),
        "burn_in": (lambda v: _num(v) and v >= 0, "number >= 0", 10.0),
        "thinning": (lambda v: _int(v) and v >= 1, "integer >= 1", 1),
        "box": (lambda v: isinstance(v, list) and len(v) == 2 and all(map(_num, v)) and v[0] < v[1],
                "[lo, hi] with lo < hi", [-5.0, 5.0]),
        "bins": (lambda v: _int(v) and v >= 1, "integer >= 1", 50),
    },
    "coupling": {
        "x0_list": (lambda v: isinstance(v, list) and len(v) >= 2 and all(map(_vec, v)), "list of >= 2 states",
                    [-2.0, 2.0]),
        "window": (lambda v: _num(v) and v > 0, "positive number", 1.0),
    },
    "tightness": {
        "gamma": (lambda v: _num(v) and v > 0, "positive number", 0.3),
        "kappas": (lambda v: isinstance(v, list) and len(v) >= 1 and all(_num(x) and x >= 0 for x in v),
                   "list of numbers >= 0", [0.01, 0.02, 0.05, 0.1, 0.2]),
        "window": (lambda v: _num(v) and 0 < v <= 1, "number in (0, 1]", 1.0),
        "t_start": (lambda v: _num(v) and v >= 0, "number >= 0", 0.0),
        "rel_se_max": (lambda v: _num(v) and v > 0, "positive number", 0.1),
    },
    "girsanov": {
        "T": (lambda v: v is None or (_num(v) and v > 0), "null or positive number", None),
        "n_batches": (lambda v: _int(v) and v >= 1, "integer >= 1", 8),
        "method": (lambda v: v in ("operator", "discrete"), "'operator' or 'discrete'", "operator"),
    },
}
_NULLABLE_SECTIONS = {"drift", "u"}
_OPTIONAL_SECTIONS = {"drift", "u", "noise", "ergodic", "coupling", "tightness", "girsanov"}


def _fill(section: str, given: dict) -> dict:
    fields = _FIELDS[section]
    out = {}
    for key in given:
        if key not in fields:
            path = f"{section}.{key}" if section else key
            raise ConfigError(path, "unknown key")
    for key, (ok, desc, default) in fields.items():
        path = f"{section}.{key}" if section else key
        if key in given:
            v = given[key]
            if not ok(v):
                raise ConfigError(path, f"expected {desc}, got {v!r}")
            if _num(v) and not math.isfinite(v):
                raise ConfigError(path, "must be finite")
            out[key] = v
        elif default is _REQUIRED:
            raise ConfigError(path, "missing required key")
        else:
            out[key] = default
    return out


def validate_config(raw: dict) -> dict:
    """Return a fully populated copy of ``raw`` or raise :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    sections = set(_FIELDS) - {""}
    top = {k: v for k, v in raw.items() if k not in sections}
    out = _fill("", top)
    if out["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {out['schema_version']}, expected {SCHEMA_VERSION}")
    for sec in sorted(sections):
        if sec not in raw:
            if sec in _OPTIONAL_SECTIONS:
                out[sec] = None if sec in _NULLABLE_SECTIONS else _fill(sec, {})
                continue
            raise ConfigError(sec, "missing required section")
        val = raw[sec]
        if val is None and sec in _NULLABLE_SECTIONS:
            out[sec] = None
            continue
        if not isinstance(val, dict):
            raise ConfigError(sec, "expected an object")
        out[sec] = _fill(sec, val)
    d = out["hurst"]["d"]
    if isinstance(out["x0"], list) and len(out["x0"]) != d:
        raise ConfigError("x0", f"length {len(out['x0'])} does not match d={d}")
    return out


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    return validate_config(raw)


def default_config(H: float = 0.4, dt: float = 2**-8, n_steps: int = 256) -> dict:
    return validate_config({"schema_version": SCHEMA_VERSION, "hurst": {"H": H}, "grid": {"dt": dt, "n_steps": n_steps}})


def build_sde_config(conf: dict, psi=None) -> SdeConfig:
    """Translate a validated config into an :class:`SdeConfig` (may raise RegimeError)."""
    hp = HurstParams(conf["hurst"]["H"], conf["hurst"]["d"])
    grid = TimeGrid(conf["grid"]["dt"], conf["grid"]["n_steps"])
    drift = None
    if conf["drift"] is not None:
        dd = dict(conf["drift"])
        dd["d"] = hp.d
        if dd["kind"] == "constant":
            v = dd["value"]
            dd["value"] = list(np.broadcast_to(np.asarray(v, dtype=float), (hp.d,)))
        drift = drift_from_dict(dd)
    u = None if conf["u"] is None else DissipativeField(conf["u"]["lam"], conf["u"]["pert"])
    return SdeConfig(hp, drift, u, conf["x0"], grid, psi=psi, scheme=conf["scheme"], J=conf["J"],
                     n_quad=conf["n_quad"])


def sample_noise(conf: dict, grid: TimeGrid | None = None, module: str = "noise", threads: int = 1) -> FbmPath:
    """Sample the configured noise in fixed chunks of paths.

    Chunk ``i`` draws from the stream ``(seed, module, i)``, so the result is
    bitwise identical for every ``threads`` value.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .rng import chunk_slices

    hp = HurstParams(conf["hurst"]["H"], conf["hurst"]["d"])
    grid = grid or TimeGrid(conf["grid"]["dt"], conf["grid"]["n_steps"])
    nc = conf["noise"]

    def draw(item):
        i, sl = item
        rng = make_rng(conf["seed"], module, i)
        n = sl.stop - sl.start
        if nc["sampler"] == "exact":
            return sample_fbm_exact(hp, grid, rng, n)
        return sample_fbm_mvn(hp, grid, nc["past_horizon"], rng, n)

    items = list(enumerate(chunk_slices(nc["n_paths"], nc["chunk"])))
    if threads <= 1:
        parts = [draw(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(draw, items))
    return _concat(parts)


def _concat(parts: list) -> FbmPath:
    if len(parts) == 1:
        return parts[0]
    from dataclasses import replace

    first = parts[0]
    values = np.concatenate([p.values for p in parts])
    drv = None
    if first.driver is not None:
        fields = ("dB", "Z", "dB_past", "Z_past", "dB_geo", "xi")
        drv = replace(first.driver, **{f: np.concatenate([getattr(p.driver, f) for p in parts]) for f in fields})
    return FbmPath(first.grid, values, first.params, drv)
