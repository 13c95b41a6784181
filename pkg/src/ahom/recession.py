"""Recession functions ``phi_inf(b) = limsup_{t -> inf} phi(t b) / t``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ahom.cell import SolverOptions, f_hom
from ahom.integrands import Integrand
from ahom.operator_core import Operator, in_cone

DEFAULT_T = tuple(2.0**k for k in range(4, 15))


class NonFiniteValue(ArithmeticError):
    pass


@dataclass
class RecessionEstimate:
    b: np.ndarray
    t_samples: np.ndarray
    ratios: np.ndarray
    estimate: float
    monotone_certified: bool
    tol: float
    expect_monotone: bool = False
    warnings: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.t_samples.tolist(), self.ratios.tolist()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "ratio"])
            for t, r in self.rows():
                w.writerow([f"{t:.16e}", f"{r:.16e}"])

    def summary(self) -> dict:
        return {"b": self.b.tolist(), "estimate": self.estimate,
                "monotone_certified": self.monotone_certified,
                "expect_monotone": self.expect_monotone, "warnings": list(self.warnings)}


def recession(phi, b, t_schedule=DEFAULT_T, tol: float = 1e-3, growth=None) -> RecessionEstimate:
    """Estimate ``phi_inf(b)`` from ratios ``phi(t b) / t`` along ``t_schedule``.

    The limsup is approximated by the largest of the last three ratios. When
    the ratios are nondecreasing (within ``tol``) and the last two agree to
    ``tol`` the estimate is certified and equals the last ratio.
    ``growth=(C1, C2)`` adds bound checks to ``warnings``.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if not np.any(b):
        raise ValueError("direction b must be nonzero")
    t = np.asarray(t_schedule, dtype=float)
    if t.size < 3 or np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("t_schedule must be positive, ascending and have >= 3 entries")
    ratios = np.empty_like(t)
    for i, ti in enumerate(t):
        v = float(phi(ti * b))
        if not math.isfinite(v):
            raise NonFiniteValue(f"phi(t b) is not finite at t={ti}")
        ratios[i] = v / ti
    monotone = bool(np.all(np.diff(ratios) >= -tol)) and abs(ratios[-1] - ratios[-2]) < tol
    estimate = float(ratios[-1]) if monotone else float(ratios[-3:].max())
    est = RecessionEstimate(b, t, ratios, estimate, monotone, tol)
    if growth is not None:
        c1, c2 = growth
        nb = float(np.linalg.norm(b))
        lo, hi = c1 * nb - tol, c2 * (1.0 / t[0] + nb) + tol
        if ratios.min() < lo or ratios.max() > hi:
            est.warnings.append(f"ratios leave growth bounds [{lo:.6g}, {hi:.6g}]")
    return est


def recession_of_fhom(f: Integrand, op: Operator, b, t_schedule=DEFAULT_T, R_list=(1,),
                      points_per_cell: int = 16, opts: SolverOptions | None = None,
                      tol: float | None = None) -> RecessionEstimate:
    """Recession function of the homogenized density along ``b``.

    For directions in the characteristic cone the homogenized density is
    convex along ``b``, so the secant slopes ``(phi(t b) - phi(0)) / t`` are
    nondecreasing; failures there are reported as solver-accuracy warnings.
    The ratios themselves are only monotone when ``phi(0) = 0``.
    """
    opts = opts or SolverOptions()
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if not np.any(b):
        raise ValueError("direction b must be nonzero")
    t = np.asarray(t_schedule, dtype=float)
    if tol is None:
        # smoothing and stopping scale with (1 + |t b|), so ratio errors are ~ value_tol
        tol = opts.value_tol

    def phi(z):
        return f_hom(f, op, z, R_list, points_per_cell, opts).f_hom_estimate

    est = recession(phi, b, t, tol, growth=f.growth if f.kernel.linear_growth else None)
    est.expect_monotone = in_cone(op, b)
    if est.expect_monotone:
        slopes = est.ratios - phi(np.zeros_like(b)) / est.t_samples
        if np.any(np.diff(slopes) < -tol):
            est.warnings.append("direction lies in the characteristic cone but secant slopes decrease: "
                                "cell solves are not accurate enough")
    return est
