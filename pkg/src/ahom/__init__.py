"""Homogenized energy densities for linear-growth integrands on A-free fields."""

from ahom.operator_core import (
    ConeReport,
    ConstantRankError,
    Operator,
    builtin,
    characteristic_cone,
    check_constant_rank,
    cone_witnesses,
    in_cone,
    symbol,
)
from ahom.fields import Grid, PeriodicField, apply_A, forward_spectrum, inverse_spectrum
from ahom.projection import ProjectorPlan, build_plan, project
from ahom.integrands import Coefficient, Integrand, make_integrand
from ahom.cell import (
    CellSolution,
    HomDensityResult,
    SolverOptions,
    aqc_check,
    f_hom,
    solve_cell,
)
from ahom.recession import RecessionEstimate, recession, recession_of_fhom
from ahom.measure import MeasureSpec, Piece, evaluate, is_A_free_witness

__all__ = [
    "CellSolution",
    "Coefficient",
    "ConeReport",
    "ConstantRankError",
    "Grid",
    "HomDensityResult",
    "Integrand",
    "MeasureSpec",
    "Operator",
    "PeriodicField",
    "Piece",
    "ProjectorPlan",
    "RecessionEstimate",
    "SolverOptions",
    "apply_A",
    "aqc_check",
    "build_plan",
    "builtin",
    "characteristic_cone",
    "check_constant_rank",
    "cone_witnesses",
    "evaluate",
    "f_hom",
    "forward_spectrum",
    "in_cone",
    "inverse_spectrum",
    "is_A_free_witness",
    "make_integrand",
    "project",
    "recession",
    "recession_of_fhom",
    "solve_cell",
    "symbol",
]
