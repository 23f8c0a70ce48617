"""Empirical exponential-moment threshold kappa0 against the drift amplitude."""

import argparse

import numpy as np

from fbmsde.besov_drift import DissipativeField, make_lacunary_drift
from fbmsde.fbm_core import HurstParams, TimeGrid, sample_fbm_mvn
from fbmsde.ergodics import tightness_report
from fbmsde.sde_solver import SdeConfig, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--paths", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    H, dt = 0.4, 2**-6
    p = HurstParams(H)
    g = TimeGrid(dt, int(args.T / dt))
    noise = sample_fbm_mvn(p, g, None, np.random.default_rng(args.seed), args.paths)
    kappas = np.linspace(0.002, 0.3, 150)
    print("A,kappa0,window_ratio_at_kappa0_over_4")
    for A in args.amplitudes:
        cfg = SdeConfig(p, make_lacunary_drift(-0.2, 8, A=A, seed=3), DissipativeField(1.0), 0.0, g)
        rep = tightness_report(solve(cfg, noise).X, dt, 0.3, kappas, t_start=1.0, H=H)
        print(f"{A},{rep.kappa0:.4f},{rep.window_ratio(rep.kappa0 / 4):.4f}", flush=True)


if __name__ == "__main__":
    main()
