"""Command-line experiment driver.

Every subcommand reads a JSON config, writes its artifacts plus
``manifest.json`` into ``--out`` and exits with

* 0 on success,
* 1 on a validation error (bad config, regime error, bad argument),
* 2 on a numerical failure,
* 3 when a verification suite fails.

Errors are reported as JSON on stderr and in ``<out>/diagnostics.json``.
A manifest can be passed back as ``--config`` to reproduce a run.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .besov_drift import classify_regime
from .config import SCHEMA_VERSION, ConfigError, build_sde_config, sample_noise, validate_config
from .ergodics import coupling_contraction, girsanov_drift, long_run, tightness_report
from .fbm_core import HurstParams, TimeGrid
from .io import dump_json, rows_to_csv, sha256_file, to_jsonable
from .sde_solver import NumericalFailure, RegimeError, remainder_report, solve
from .sewing import GRONWALL_MU

SUBCOMMANDS = ("sample-fbm", "classify", "solve", "ergodic-run", "couple", "tightness", "girsanov", "verify")


class AcceptanceFailure(RuntimeError):
    pass


class _Run:
    """Collects artifacts for one invocation."""

    def __init__(self, out: Path, fmt: str):
        self.out = out
        self.fmt = fmt
        self.files: list[str] = []
        self.failure: str | None = None

    def text(self, name: str, content: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(content, encoding="utf-8")
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, dump_json(obj))

    def table(self, stem: str, header, rows) -> None:
        """Write a table as CSV or as JSON columns according to ``--format``."""
        if self.fmt == "csv":
            self.text(f"{stem}.csv", rows_to_csv(header, rows))
        else:
            cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
            self.json(f"{stem}.json", cols)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _path_columns(prefix: str, P: int, d: int) -> list[str]:
    return [f"{prefix}_{p}" if d == 1 else f"{prefix}_{p}_{c}" for p in range(P) for c in range(d)]


def _wide_rows(times, values) -> list:
    P, n, d = values.shape
    flat = values.transpose(1, 0, 2).reshape(n, P * d)
    return [[float(t), *map(float, row)] for t, row in zip(times, flat)]


def cmd_sample_fbm(conf, run: _Run, threads: int, args) -> dict:
    noise = sample_noise(conf, threads=threads)
    P, _, d = noise.values.shape
    run.table("paths", ["t"] + _path_columns("w", P, d), _wide_rows(noise.grid.nodes, noise.values))
    return {"n_paths": P, "n_nodes": noise.grid.n_nodes}


def cmd_classify(conf, run: _Run, threads: int, args) -> dict:
    if conf["drift"] is None:
        raise ConfigError("drift", "classify needs a drift section with alpha")
    label = classify_regime(conf["drift"]["alpha"], conf["hurst"]["H"]).as_dict()
    run.json("classification.json", label)
    print(json.dumps(label, sort_keys=True))
    return label


def cmd_solve(conf, run: _Run, threads: int, args) -> dict:
    cfg = build_sde_config(conf)
    sol = solve(cfg, sample_noise(conf, threads=threads))
    P, _, d = sol.X.shape
    run.table("solution", ["t"] + _path_columns("x", P, d), _wide_rows(sol.grid.nodes, sol.X))
    rem = remainder_report(sol) if sol.grid.n_steps >= 16 else None
    summary = {"level": cfg.level, "regime": cfg.regime.as_dict() if cfg.drift is not None else None,
               "decomposition_error": sol.decomposition_error(), "remainder": None if rem is None else rem.as_dict()}
    run.json("summary.json", summary)
    return summary


def cmd_ergodic_run(conf, run: _Run, threads: int, args) -> dict:
    cfg = build_sde_config(conf)
    e = conf["ergodic"]
    grid = TimeGrid(cfg.grid.dt, int(round(e["T_total"] / cfg.grid.dt)))
    noise = sample_noise(conf, grid=grid, threads=threads)
    m = long_run(cfg, e["T_total"], e["burn_in"], e["thinning"], noise=noise, box=tuple(e["box"]), bins=e["bins"])
    d = m.counts.shape[0]
    run.table("histogram", ["bin_lo", "bin_hi"] + [f"count_{i}" for i in range(d)], m.histogram_rows())
    run.json("summary.json", m.as_dict())
    return m.as_dict()


def cmd_couple(conf, run: _Run, threads: int, args) -> dict:
    cfg = build_sde_config(conf)
    c = conf["coupling"]
    rep = coupling_contraction(cfg, c["x0_list"], sample_noise(conf, threads=threads), window=c["window"])
    med = np.median(rep.distance, axis=1)  # (n_pairs, n_nodes)
    rows = [[float(t), *map(float, med[:, k])] for k, t in enumerate(rep.times)]
    run.table("distance", ["t"] + [f"median_distance_{i}" for i in range(len(med))], rows)
    run.json("summary.json", rep.as_dict())
    return rep.as_dict()


def cmd_tightness(conf, run: _Run, threads: int, args) -> dict:
    cfg = build_sde_config(conf)
    tc = conf["tightness"]
    if tc["gamma"] >= cfg.hurst.H:
        raise ConfigError("tightness.gamma", f"must be below H={cfg.hurst.H}")
    sol = solve(cfg, sample_noise(conf, threads=threads))
    rep = tightness_report(sol.X, cfg.grid.dt, tc["gamma"], tc["kappas"], window=tc["window"],
                           t_start=tc["t_start"], rel_se_max=tc["rel_se_max"], H=cfg.hurst.H)
    rows = [[float(s), *map(float, rep.table[i])] for i, s in enumerate(rep.window_starts)]
    run.table("tightness", ["window_start"] + [f"kappa_{format(k, 'g')}" for k in rep.kappas], rows)
    summary = rep.as_dict()
    summary["window_ratio_at_kappa0_over_4"] = rep.window_ratio(rep.kappa0 / 4) if rep.kappa0 > 0 else None
    run.json("summary.json", summary)
    return summary


def cmd_girsanov(conf, run: _Run, threads: int, args) -> dict:
    cfg = build_sde_config(conf)
    gc = conf["girsanov"]
    sol = solve(cfg, sample_noise(conf, threads=threads))
    rep = girsanov_drift(sol, cfg, n_batches=gc["n_batches"], T=gc["T"], method=gc["method"])
    mom = rep.reweighted_moments(sol.X, sol.X[:, :1])
    d = sol.X.shape[-1]
    head = ["t"] + [f"{k}_{i}" for k in ("mean", "mean_se", "second", "second_se") for i in range(d)]
    rows = [[float(t)] + [float(mom[k][j, i]) for k in ("mean", "mean_se", "second", "second_se") for i in range(d)]
            for j, t in enumerate(sol.grid.nodes)]
    run.table("reweighted_moments", head, rows)
    run.json("summary.json", rep.as_dict())
    return rep.as_dict()


def cmd_verify(conf, run: _Run, threads: int, args) -> dict:
    from .acceptance import SUITES, run_suite

    if args.suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
    results = run_suite(args.suite, log=lambda s: print(s, file=sys.stderr))
    out = {"suite": args.suite, "passed": all(r.passed for r in results),
           "results": [r.as_dict() | {"seconds": None} for r in results]}
    run.json("verification.json", out)
    if not out["passed"]:
        run.failure = ", ".join(str(r.number) for r in results if not r.passed)
    return {"suite": args.suite, "passed": True}


COMMANDS = {
    "sample-fbm": cmd_sample_fbm, "classify": cmd_classify, "solve": cmd_solve, "ergodic-run": cmd_ergodic_run,
    "couple": cmd_couple, "tightness": cmd_tightness, "girsanov": cmd_girsanov, "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


def _read_config(path: str | None):
    """Config dict and, for manifests, the recorded subcommand arguments."""
    if path is None:
        return None, {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        return validate_config(raw["config"]), raw.get("arguments", {})
    return validate_config(raw), {}


def _default_for(sub: str) -> dict:
    # the same small default for every subcommand; ``sub`` is kept for clarity at call sites
    base = {"schema_version": SCHEMA_VERSION, "hurst": {"H": 0.4}, "grid": {"dt": 2**-8, "n_steps": 256}}
    return validate_config(base)


def _constants(conf: dict) -> dict:
    hp = HurstParams(conf["hurst"]["H"], conf["hurst"]["d"])
    return {"c_H": hp.c_H, "c_tilde_H": hp.c_tilde_H, "gronwall_mu": GRONWALL_MU}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbmsde", description="fBm-driven SDE experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config or an emitted manifest")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker cap; 1 is the reference mode")
    common.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("suite", nargs="?", help="module name, 'acceptance' or 'all'")
        if name == "classify":
            p.add_argument("--H", type=float, dest="H_value")
            p.add_argument("--alpha", type=float)
    return ap


def _emit_error(out: Path, payload: dict) -> None:
    text = json.dumps(to_jsonable(payload), sort_keys=True)
    print(text, file=sys.stderr)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "diagnostics.json").write_text(text + "\n", encoding="utf-8")
    except OSError:
        pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        conf, recorded = _read_config(args.config)
        if args.command == "verify" and not getattr(args, "suite", None):
            args.suite = recorded.get("suite")
        conf = copy.deepcopy(conf) if conf is not None else _default_for(args.command)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            conf["seed"] = args.seed
        if args.command == "classify":
            if args.H_value is not None:
                conf["hurst"]["H"] = args.H_value
            if args.alpha is not None:
                conf["drift"] = {**(conf["drift"] or {}), "alpha": args.alpha}
            conf = validate_config(conf)
        if args.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        run = _Run(out, args.fmt)
        COMMANDS[args.command](conf, run, args.threads, args)
        arguments = {"suite": args.suite} if args.command == "verify" else {}
        manifest = {
            "manifest_version": 1,
            "subcommand": args.command,
            "arguments": arguments,
            "format": args.fmt,
            "config": conf,
            "constants": _constants(conf),
            "version": __version__,
            "outputs": [{"file": f, "sha256": sha256_file(out / f)} for f in run.files],
        }
        (out / "manifest.json").write_text(dump_json(manifest), encoding="utf-8")
        if run.failure:
            raise AcceptanceFailure(run.failure)
        return 0
    except AcceptanceFailure as exc:
        _emit_error(out, {"error": "acceptance", "failed": str(exc)})
        return 3
    except ConfigError as exc:
        _emit_error(out, exc.as_dict())
        return 1
    except RegimeError as exc:
        _emit_error(out, {"error": "regime", "message": str(exc)})
        return 1
    except NumericalFailure as exc:
        _emit_error(out, {"error": "numerical", "message": str(exc), "step": getattr(exc, "step", None),
                          "time": getattr(exc, "time", None)})
        return 2
    except FloatingPointError as exc:
        _emit_error(out, {"error": "numerical", "message": str(exc)})
        return 2
    except ValueError as exc:
        _emit_error(out, {"error": "validation", "key": None, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
