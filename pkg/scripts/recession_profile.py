"""Ratio tables f_hom(t b) / t for the |z| and sqrt(1+|z|^2) laminates.

For the 1-homogeneous kernel the ratios are flat; for the smooth kernel they
increase towards the recession value.

    python3 scripts/recession_profile.py --out recession.csv
"""

import argparse
import csv
from dataclasses import dataclass

import numpy as np

from ahom.cell import SolverOptions
from ahom.integrands import Coefficient, make_integrand
from ahom.operator_core import builtin
from ahom.recession import recession_of_fhom


@dataclass
class RecessionConfig:
    t_min_exp: int = 2
    t_max_exp: int = 10
    points_per_cell: int = 16
    directions: int = 4


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="recession_profile.csv")
    ap.add_argument("--ppc", type=int, default=16)
    args = ap.parse_args()
    cfg = RecessionConfig(points_per_cell=args.ppc)
    op = builtin("div", N=2)
    lam = Coefficient("laminate", low=1.0, high=4.0)
    t = [2.0**k for k in range(cfg.t_min_exp, cfg.t_max_exp + 1)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kernel", "theta", "t", "ratio"])
        for name in ("norm", "smooth"):
            f = make_integrand(name, lam)
            for th in np.pi * np.arange(cfg.directions) / (2 * (cfg.directions - 1)):
                b = np.array([np.cos(th), np.sin(th)])
                est = recession_of_fhom(f, op, b, t, points_per_cell=cfg.points_per_cell, opts=SolverOptions())
                for ti, r in est.rows():
                    w.writerow([name, f"{th:.16e}", f"{ti:.16e}", f"{r:.16e}"])
                flag = "certified" if est.monotone_certified else "tail max"
                print(f"{name:6s} theta={th:5.3f} estimate={est.estimate:.6f} ({flag})")


if __name__ == "__main__":
    main()
