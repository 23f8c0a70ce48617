"""Local log-log slopes of the past-conditioning kernel across scales.

Shows the two power-law regimes: x^{H-1/2} for large x and x^{H+1/2} near 0.
"""

import argparse

import numpy as np

from fbmsde.conditioning import kernel_f


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--H", type=float, nargs="+", default=[0.1, 0.25, 0.4])
    args = ap.parse_args()
    x = np.logspace(-5, 4, 37)
    print("x_mid," + ",".join(f"slope_H={H}" for H in args.H))
    slopes = [np.diff(np.log(kernel_f(x, H))) / np.diff(np.log(x)) for H in args.H]
    for i, xm in enumerate(np.sqrt(x[:-1] * x[1:])):
        print(f"{xm:.3e}," + ",".join(f"{s[i]:.4f}" for s in slopes))


if __name__ == "__main__":
    main()
