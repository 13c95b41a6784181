"""A-free witness residuals of a surface layer under div as the mollifier shrinks.

A layer with tangential polar is divergence-free and its residual vanishes; a
normal polar leaves a residual growing like 1/eta.

    python3 scripts/witness_trend.py
"""

import argparse

import numpy as np

from ahom.measure import MeasureSpec, Piece, is_A_free_witness
from ahom.operator_core import builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=4, help="eta = 1/8 ... 1/2^(levels+2)")
    args = ap.parse_args()
    etas = [2.0 ** -(k + 3) for k in range(args.levels)]
    div = builtin("div", N=2)
    for label, v in (("tangential", (0.0, 1.0)), ("normal", (1.0, 0.0))):
        piece = Piece("surface", {"axis": 0, "offset": 0.5, "extent": [[0.0, 1.0]]}, v, 1.0)
        rep = is_A_free_witness(div, MeasureSpec([[0, 1], [0, 1]], np.zeros((2, 4, 4)), [piece]), etas)
        for eta, r, e in zip(rep.etas, rep.residuals, rep.moll_errors):
            print(f"{label:10s} eta={eta:.5f} residual={r:.4e} eta*TV={e:.4e}")


if __name__ == "__main__":
    main()
