"""Invariant battery run by ``ahom check``.

Each check returns a ``CheckResult`` with a signed margin: ``margin >= 0``
means the property holds with that much room.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ahom import fields
from ahom.cell import SolverOptions, solve_cell
from ahom.fields import Grid, PeriodicField, apply_A, l2_norm
from ahom.integrands import Integrand, make_integrand
from ahom.measure import MeasureSpec, evaluate
from ahom.operator_core import Operator, characteristic_cone, check_constant_rank, symbol
from ahom.projection import build_plan, project
from ahom.recession import recession


@dataclass
class CheckResult:
    module: str
    prop: str
    passed: bool
    margin: float


def _res(module, prop, tol, err):
    return CheckResult(module, prop, bool(err <= tol), float(tol - err))


def operator_checks(op: Operator, rng) -> list:
    out = []
    xi, eta = rng.standard_normal((2, op.N))
    a, b = rng.standard_normal(2)
    err = np.abs(symbol(op, a * xi + b * eta) - a * symbol(op, xi) - b * symbol(op, eta)).max()
    out.append(_res("operator_core", "symbol_linear", 1e-12, err))
    c, ok = check_constant_rank(op)
    out.append(CheckResult("operator_core", "constant_rank", ok, float(c)))
    if not ok:
        return out
    cone = characteristic_cone(op, 200)
    res = cone.residuals.max() if len(cone.residuals) else 0.0
    out.append(_res("operator_core", "cone_witness_residual", 1e-10, res))
    out.append(CheckResult("operator_core", "h2_span", cone.h2_satisfied, float(cone.span_dim - op.d)))
    return out


def field_checks(op: Operator, rng, n: int = 16) -> list:
    grid = Grid(op.N, 1, n)
    f = PeriodicField(grid, rng.standard_normal((op.d,) + grid.shape))
    back = fields.inverse_spectrum(grid, fields.forward_spectrum(f))
    out = [_res("periodic_fields", "roundtrip", 1e-12, np.abs(back.values - f.values).max() / np.abs(f.values).max())]
    spec = fields.forward_spectrum(f)
    parseval = abs(l2_norm(f) ** 2 - np.sum(np.abs(spec) ** 2)) / l2_norm(f) ** 2
    out.append(_res("periodic_fields", "parseval", 1e-10, parseval))
    return out


def projection_checks(op: Operator, rng, n: int = 16) -> list:
    grid = Grid(op.N, 1, n)
    plan = build_plan(op, grid)
    f = PeriodicField(grid, rng.standard_normal((op.d,) + grid.shape))
    g = PeriodicField(grid, rng.standard_normal((op.d,) + grid.shape))
    pf, pg = project(plan, f), project(plan, g)
    out = [
        _res("projection", "idempotent", 1e-10, l2_norm(project(plan, pf) - pf)),
        _res("projection", "self_adjoint", 1e-10, abs(fields.inner(pf, g) - fields.inner(f, pg))),
        _res("projection", "A_free", 1e-9 * (1 + l2_norm(pf)), l2_norm(apply_A(op, pf))),
        _res("projection", "mean_zero", 1e-12, np.abs(fields.mean(pf)).max()),
        _res("projection", "contraction", 1e-12 * l2_norm(f), l2_norm(pf) - l2_norm(f)),
    ]
    return out


def cell_checks(f: Integrand, op: Operator, rng, opts: SolverOptions, points_per_cell: int = 16) -> list:
    out = []
    tol = opts.value_tol
    b1, b2 = rng.standard_normal((2, op.d))
    s1 = solve_cell(f, op, b1, 1, opts=opts, points_per_cell=points_per_cell)
    s2 = solve_cell(f, op, b2, 1, opts=opts, points_per_cell=points_per_cell)
    out.append(_res("cell_problem", "zero_competitor", 1e-12, s1.value - s1.zero_value))
    feas = max(s1.diagnostics.residual_A / (1e-8 * (1 + l2_norm(s1.minimizer))),
               s1.diagnostics.residual_mean / 1e-10)
    out.append(_res("cell_problem", "feasibility", 1.0, feas))
    if f.kernel.linear_growth:
        L = f.lipschitz_L
        lip = abs(s1.value - s2.value) - L * np.linalg.norm(b1 - b2)
        out.append(_res("cell_problem", "lipschitz_transfer", 2 * tol, lip))
        c1, c2 = f.growth
        nb = np.linalg.norm(b1)
        out.append(_res("cell_problem", "growth_lower", tol, c1 * nb - s1.value))
        out.append(_res("cell_problem", "growth_upper", tol, s1.value - c2 * (1 + nb)))
    steps = rng.integers(0, points_per_cell, op.N)
    shifted = f.shifted(steps / points_per_cell)
    s3 = solve_cell(shifted, op, b1, 1, opts=opts, points_per_cell=points_per_cell)
    out.append(_res("cell_problem", "translation_invariance", 2 * tol, abs(s3.value - s1.value)))
    s4 = solve_cell(f, op, b1, 2, opts=opts, points_per_cell=points_per_cell)
    out.append(_res("cell_problem", "divisibility_monotone", tol, s4.value - s1.value))
    if f.convex_in_zeta:
        out.append(_res("cell_problem", "convex_multistart_spread", tol, s1.diagnostics.spread))
    return out


def recession_checks() -> list:
    smooth = make_integrand("smooth")
    est = recession(lambda z: float(smooth(z)), np.array([1.0, 0.0]))
    norm = make_integrand("norm")
    est2 = recession(lambda z: float(norm(z)), np.array([0.6, 0.8]))
    return [
        _res("recession", "smooth_norm_limit", 1e-3, abs(est.estimate - 1.0)),
        _res("recession", "norm_ratios_exact", 1e-12, np.abs(est2.ratios - 1.0).max()),
    ]


def measure_checks() -> list:
    norm = make_integrand("norm")
    smooth = make_integrand("smooth")
    mu0 = MeasureSpec([[0, 1], [0, 1]], np.zeros((2, 4, 4)))
    atom = MeasureSpec([[0, 1], [0, 1]], np.zeros((2, 4, 4)),
                       [dict(kind="atom", location=[0.5, 0.5], direction=[1.0, 0.0], mass=3.0)])
    dens = np.zeros((2, 8, 8))
    dens[0] = 1.0
    mixed = MeasureSpec([[0, 1], [0, 1]], dens,
                        [dict(kind="atom", location=[0.3, 0.6], direction=[0.0, 1.0], mass=2.0)])
    unit = lambda v: float(np.linalg.norm(v))
    return [
        _res("measure_functional", "zero_measure", 1e-12, abs(evaluate(norm, unit, mu0))),
        _res("measure_functional", "atom_total_variation", 1e-12, abs(evaluate(norm, unit, atom) - 3.0)),
        _res("measure_functional", "density_plus_atom", 1e-6,
             abs(evaluate(smooth, unit, mixed) - (np.sqrt(2) + 2))),
    ]


def run_all(op: Operator, f: Integrand, seed: int = 0, opts: SolverOptions | None = None,
            points_per_cell: int = 16) -> list:
    opts = opts or SolverOptions(seed=seed)
    rng = np.random.default_rng(seed)
    results = []
    results += operator_checks(op, rng)
    if not results[1].passed:
        # projector and cell checks need constant rank
        return results
    results += field_checks(op, rng)
    results += projection_checks(op, rng)
    results += cell_checks(f, op, rng, opts, points_per_cell)
    results += recession_checks()
    results += measure_checks()
    return results

