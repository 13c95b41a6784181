import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahom.cell import (
    PolarTable,
    SolverDivergence,
    SolverOptions,
    aqc_check,
    f_hom,
    solve_cell,
)
from ahom.fields import Grid, apply_A, l2_norm, mean
from ahom.integrands import Coefficient, make_integrand
from ahom.operator_core import builtin
from oracles import laminate_fhom, norm, sq

LAM = Coefficient("laminate", low=1.0, high=4.0, axis=0)
DIV = builtin("div", N=2)
OPTS = SolverOptions()


def test_norm_jensen_zero_minimizer():
    for op in (DIV, builtin("curl(1,2)"), builtin("curl(2,2)")):
        b = np.zeros(op.d)
        b[0] = 1.0
        sol = solve_cell(make_integrand("norm"), op, b, 1, points_per_cell=16)
        assert sol.value == pytest.approx(1.0, abs=1e-12)
        assert np.abs(sol.minimizer.values).max() < 1e-12


def test_smooth_at_zero():
    sol = solve_cell(make_integrand("smooth"), DIV, [0.0, 0.0], 1, points_per_cell=16)
    assert sol.value == pytest.approx(1.0, abs=1e-12)
    assert np.abs(sol.minimizer.values).max() < 1e-12


@pytest.mark.parametrize("b,expected", [([1.0, 0.0], 2.5), ([0.0, 1.0], 1.6)])
def test_quadratic_laminate(b, expected):
    f = make_integrand("quadratic", LAM)
    assert laminate_fhom(sq, b) == pytest.approx(expected, rel=1e-9)
    sol = solve_cell(f, DIV, b, 1, grid=Grid(2, 1, 64))
    assert sol.value == pytest.approx(expected, rel=0.02)


@pytest.mark.parametrize("b", [[0.0, 1.0], [1.0, 0.0], [0.6, 0.8], [-1.5, 0.4]])
def test_norm_laminate_oracle(b):
    f = make_integrand("norm", LAM)
    sol = solve_cell(f, DIV, b, 1, points_per_cell=16)
    exact = laminate_fhom(norm, b)
    # smoothing floor: the Huber envelope costs at most a_max * delta_min (1 + |b|) / 2
    assert exact - 1e-12 <= sol.value <= exact + 4 * 1e-4 * (1 + np.linalg.norm(b))


def test_solution_diagnostics():
    f = make_integrand("norm", LAM)
    sol = solve_cell(f, DIV, [0.3, 1.1], 1, points_per_cell=16)
    d = sol.diagnostics
    assert d.residual_A <= 1e-8 * (1 + l2_norm(sol.minimizer))
    assert d.residual_mean <= 1e-10
    assert l2_norm(apply_A(DIV, sol.minimizer)) == pytest.approx(d.residual_A)
    assert np.abs(mean(sol.minimizer)).max() <= 1e-10
    assert 0 <= sol.value <= sol.zero_value
    assert len(d.start_values) == OPTS.n_starts
    assert d.spread <= OPTS.value_tol
    rec = sol.to_record()
    assert rec["R"] == 1 and rec["n"] == 16 and rec["value"] == sol.value


def test_solve_cell_preconditions():
    f = make_integrand("norm")
    with pytest.raises(ValueError):
        solve_cell(f, DIV, [1.0, 0.0], 2, grid=Grid(2, 1, 16))
    with pytest.raises(ValueError):
        solve_cell(f, DIV, [1.0, 0.0, 0.0], 1, points_per_cell=8)


def test_f_hom_profile_constant_for_jensen():
    res = f_hom(make_integrand("smooth"), DIV, [0.4, -0.3], R_list=(1, 2), points_per_cell=8)
    vals = [res.per_R_values[R].value for R in (1, 2)]
    np.testing.assert_allclose(vals, np.sqrt(1 + 0.25), rtol=1e-12)
    assert res.f_hom_estimate == min(vals)


def test_f_hom_constant_coefficient():
    f = make_integrand("norm", Coefficient(value=2.0))
    b = np.array([0.3, -1.2])
    res = f_hom(f, DIV, b, R_list=(1,), points_per_cell=8)
    assert res.f_hom_estimate == pytest.approx(2 * np.linalg.norm(b), rel=1e-12)


def test_f_hom_divisibility_laminate():
    f = make_integrand("norm", LAM)
    res = f_hom(f, DIV, [0.0, 1.0], R_list=(1, 2), points_per_cell=16)
    v1, v2 = res.per_R_values[1].value, res.per_R_values[2].value
    assert v2 <= v1 + OPTS.value_tol
    assert res.f_hom_estimate == min(v1, v2)
    assert res.best_R in (1, 2)


def test_f_hom_rejects_bad_R_list():
    f = make_integrand("norm")
    with pytest.raises(ValueError):
        f_hom(f, DIV, [1.0, 0.0], R_list=())
    with pytest.raises(ValueError):
        f_hom(f, DIV, [1.0, 0.0], R_list=(2, 1))


def test_f_hom_reports_partial_failures(monkeypatch):
    import ahom.cell as cell

    real = cell.solve_cell

    def flaky(f, op, b, R, **kw):
        if R == 2:
            raise SolverDivergence("boom")
        return real(f, op, b, R, **kw)

    monkeypatch.setattr(cell, "solve_cell", flaky)
    res = cell.f_hom(make_integrand("norm"), DIV, [1.0, 0.0], R_list=(1, 2), points_per_cell=8)
    assert list(res.per_R_values) == [1] and "boom" in res.errors[2]
    monkeypatch.setattr(cell, "solve_cell", lambda *a, **k: (_ for _ in ()).throw(SolverDivergence("x")))
    with pytest.raises(SolverDivergence):
        cell.f_hom(make_integrand("norm"), DIV, [1.0, 0.0], R_list=(1,))


@settings(max_examples=8, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.2, 3.0), st.floats(1.5, 4.0))
def test_homogeneity_of_cell_value(theta, r, t):
    # feasible set is a linear space, so the cell value of a(x)|z| is 1-homogeneous in b
    f = make_integrand("norm", LAM)
    b = r * np.array([np.cos(theta), np.sin(theta)])
    v1 = solve_cell(f, DIV, b, 1, points_per_cell=8).value
    vt = solve_cell(f, DIV, t * b, 1, points_per_cell=8).value
    assert abs(vt - t * v1) <= 2 * OPTS.value_tol * t


def test_translation_invariance(rng):
    f = make_integrand("norm", LAM)
    ppc = 16
    b = np.array([0.5, 0.9])
    base = solve_cell(f, DIV, b, 1, points_per_cell=ppc).value
    for steps in rng.integers(0, ppc, (3, 2)):
        g = f.shifted(steps / ppc)
        assert abs(solve_cell(g, DIV, b, 1, points_per_cell=ppc).value - base) <= 2 * OPTS.value_tol


def test_nonconvex_multistart_helps():
    # at b = (0, 1/2) the kernel is locally concave along e_1; the zero start is stationary
    # (its gradient is constant, hence projected out) while a gradient laminate does better
    f = make_integrand("nonconvex", p=[1.0, 0.0])
    sol = solve_cell(f, builtin("curl(1,2)"), [0.0, 0.5], 1, points_per_cell=16)
    d = sol.diagnostics
    assert d.start_values[0] == pytest.approx(sol.zero_value)
    # the e_1 laminate with w = (+-1/2, 0) reaches sqrt(2); no global optimality is claimed
    assert sol.value < sol.zero_value - 0.1
    assert d.best_start != 0 and sol.value == pytest.approx(min(d.start_values), abs=1e-9)


def test_options_from_dict():
    assert SolverOptions.from_dict({"max_iter": 10}).max_iter == 10
    with pytest.raises(KeyError):
        SolverOptions.from_dict({"maxiter": 10})


def test_aqc_jensen_and_zero_field():
    f = make_integrand("smooth")
    rep = aqc_check(lambda b: float(f(b)), DIV, n_tests=10, seed=1, n_quad=8)
    assert rep.violations == 0 and rep.worst_margin >= -1e-12
    rep0 = aqc_check(lambda b: float(f(b)), DIV, n_tests=3, amplitude=0.0, n_quad=4)
    np.testing.assert_allclose(rep0.margins, 0.0, atol=1e-14)


def test_aqc_flags_non_quasiconvex():
    # -|b|^2 is concave in every direction, so any nonzero A-free w breaks the inequality
    rep = aqc_check(lambda b: -float(b @ b), DIV, n_tests=5, n_quad=8)
    assert rep.violations == 5


def test_aqc_laminate_against_exact_density():
    # closed-form laminate density as the f_hom table; must be div-quasiconvex
    table = PolarTable.build(lambda b: laminate_fhom(norm, b), 64)
    rep = aqc_check(table, DIV, n_tests=20, seed=3, n_quad=8)
    assert rep.violations == 0, rep.worst_margin


def test_polar_table_interpolates_homogeneous():
    table = PolarTable.build(lambda b: np.linalg.norm(b) * (2 + b[0] / np.linalg.norm(b)), 16)
    assert table(np.array([2.0, 0.0])) == pytest.approx(6.0)
    assert table(np.array([0.0, -3.0])) == pytest.approx(6.0)


def test_fhom_callable_memoises(monkeypatch):
    import ahom.cell as cell

    calls = []
    real = cell.f_hom
    monkeypatch.setattr(cell, "f_hom", lambda *a, **k: calls.append(1) or real(*a, **k))
    fn = cell.fhom_callable(make_integrand("norm"), DIV, points_per_cell=8)
    assert fn([1.0, 0.0]) == pytest.approx(1.0)
    fn(np.array([1.0, 0.0]))
    assert len(calls) == 1
