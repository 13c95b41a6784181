import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahom.fields import Grid, PeriodicField, write_binary, write_csv
from ahom.measure import MeasureSpec, Piece, evaluate, is_A_free_witness, mollify
from ahom.operator_core import builtin
from oracles import normal_layer_residual

UNIT = [[0.0, 1.0], [0.0, 1.0]]
DIV = builtin("div", N=2)
norm = lambda z: float(np.linalg.norm(z))
smooth = lambda z: float(np.sqrt(1 + np.dot(z, z)))


def surface(direction, mass=1.0, offset=0.5, extent=((0.0, 1.0),)):
    return Piece("surface", {"axis": 0, "offset": offset, "extent": [list(e) for e in extent]},
                 tuple(direction), mass)


def test_evaluate_zero_measure():
    mu = MeasureSpec(UNIT, np.zeros((2, 8, 8)))
    assert evaluate(norm, norm, mu) == 0.0


def test_evaluate_single_atom():
    mu = MeasureSpec(UNIT, np.zeros((2, 8, 8)), [Piece("atom", (0.3, 0.7), (1.0, 0.0), 3.0)])
    assert evaluate(norm, norm, mu) == pytest.approx(3.0, abs=1e-12)


def test_evaluate_density_plus_atom():
    dens = np.zeros((2, 8, 8))
    dens[0] = 1.0
    mu = MeasureSpec(UNIT, dens, [Piece("atom", (0.5, 0.5), (0.0, 1.0), 2.0)])
    assert evaluate(smooth, norm, mu) == pytest.approx(np.sqrt(2) + 2, abs=1e-12)


def test_evaluate_rejects_nonfinite():
    mu = MeasureSpec(UNIT, np.ones((2, 4, 4)), [Piece("atom", (0.5, 0.5), (0.0, 1.0), 2.0)])
    with pytest.raises(ValueError):
        evaluate(lambda z: np.nan, norm, mu)
    with pytest.raises(ValueError):
        evaluate(norm, lambda v: np.inf, mu)


@pytest.mark.parametrize("piece", [
    Piece("atom", (0.5, 0.5), (1.0, 1.0), 1.0),
    Piece("atom", (0.5, 0.5), (1.0, 0.0), 0.0),
    Piece("atom", (1.0, 0.5), (1.0, 0.0), 1.0),
    Piece("atom", (0.5,), (1.0, 0.0), 1.0),
    Piece("curve", (0.5, 0.5), (1.0, 0.0), 1.0),
    Piece("surface", {"axis": 0, "offset": 0.0, "extent": [[0, 1]]}, (1.0, 0.0), 1.0),
    Piece("surface", {"axis": 0, "offset": 0.5, "extent": [[0, 1.5]]}, (1.0, 0.0), 1.0),
    Piece("atom", (0.5, 0.5), (1.0, 0.0, 0.0), 1.0),
])
def test_spec_rejects(piece):
    with pytest.raises(ValueError):
        MeasureSpec(UNIT, np.zeros((2, 4, 4)), [piece])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0, 2 * np.pi),
                          st.floats(0.01, 5)), min_size=1, max_size=5),
       st.floats(0.1, 4))
def test_additive_and_homogeneous(specs, s):
    pieces = [Piece("atom", (x, y), (np.cos(th), np.sin(th)), m) for x, y, th, m in specs]
    aniso = lambda z: float(abs(z[0]) + 2 * np.hypot(*z))
    dens = np.random.default_rng(len(specs)).standard_normal((2, 4, 4))
    full = evaluate(aniso, aniso, MeasureSpec(UNIT, dens, pieces))
    parts = evaluate(aniso, aniso, MeasureSpec(UNIT, dens)) + sum(
        evaluate(aniso, aniso, MeasureSpec(UNIT, 0 * dens, [p])) for p in pieces)
    assert full == pytest.approx(parts, rel=1e-12)
    scaled = MeasureSpec(UNIT, s * dens, [Piece(p.kind, p.location, p.direction, s * p.mass) for p in pieces])
    assert evaluate(aniso, aniso, scaled) == pytest.approx(s * full, rel=1e-12)
    # unified formula: total variation when f is the euclidean norm
    assert evaluate(norm, norm, MeasureSpec(UNIT, dens, pieces)) == pytest.approx(
        MeasureSpec(UNIT, dens, pieces).total_variation(), rel=1e-12)


def test_surface_area_and_mass():
    p = surface((0.0, 1.0), mass=2.0, extent=((0.25, 0.75),))
    assert p.area() == 0.5
    u, spacing = mollify(MeasureSpec(UNIT, np.zeros((2, 4, 4)), [p]), 1 / 16)
    assert np.sum(u[1]) * np.prod(spacing) == pytest.approx(2.0, rel=1e-12)
    atom = Piece("atom", (0.1, 0.95), (0.6, 0.8), 3.0)
    u, spacing = mollify(MeasureSpec(UNIT, np.zeros((2, 4, 4)), [atom]), 1 / 16)
    np.testing.assert_allclose(u.reshape(2, -1).sum(axis=1) * np.prod(spacing), [1.8, 2.4], rtol=1e-12)


def test_witness_constant_density():
    rep = is_A_free_witness(DIV, MeasureSpec(UNIT, np.ones((2, 4, 4))))
    assert max(rep.residuals) < 1e-12


def test_witness_tangential_and_normal():
    etas = (1 / 32, 1 / 64)
    tang = is_A_free_witness(DIV, MeasureSpec(UNIT, np.zeros((2, 4, 4)), [surface((0.0, 1.0))]), etas)
    assert tang.within(10.0) and tang.decreasing
    normal = is_A_free_witness(DIV, MeasureSpec(UNIT, np.zeros((2, 4, 4)), [surface((1.0, 0.0))]), etas)
    assert min(normal.residuals) > 0.1 and not normal.decreasing


def test_witness_normal_matches_closed_form():
    mu = MeasureSpec(UNIT, np.zeros((2, 4, 4)), [surface((1.0, 0.0), mass=1.5)])
    rep = is_A_free_witness(DIV, mu, (1 / 16,), points_per_eta=64)
    assert rep.residuals[0] == pytest.approx(normal_layer_residual(1.5, 1 / 16), rel=1e-4)


def test_witness_rejects_bad_eta():
    mu = MeasureSpec(UNIT, np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        is_A_free_witness(DIV, mu, (2.0,))
    with pytest.raises(ValueError):
        is_A_free_witness(builtin("div", N=3), mu)


def test_from_dict_files(tmp_path):
    g = Grid(2, 1, 4)
    fld = PeriodicField(g, np.full((2, 4, 4), 0.5))
    write_csv(fld, tmp_path / "d.csv")
    write_binary(fld, tmp_path / "d.bin")
    for name in ("d.csv", "d.bin"):
        doc = {"omega": UNIT, "density": name,
               "pieces": [{"kind": "atom", "location": [0.5, 0.5], "direction": [0, 1], "mass": 1}]}
        mu = MeasureSpec.from_json(json.dumps(doc), base=tmp_path)
        assert evaluate(norm, norm, mu) == pytest.approx(np.sqrt(0.5) + 1)
    with pytest.raises(FileNotFoundError):
        MeasureSpec.from_dict({"omega": UNIT, "density": "missing.csv"}, base=tmp_path)
    mu = MeasureSpec.from_dict({"omega": UNIT, "density": {"constant": [1, 0], "points": 4}})
    assert mu.density.shape == (2, 4, 4)
