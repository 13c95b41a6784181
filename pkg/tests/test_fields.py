import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahom.fields import (
    Grid,
    PeriodicField,
    apply_A,
    forward_spectrum,
    inverse_spectrum,
    l1_norm,
    l2_norm,
    mean,
    read_binary,
    read_csv,
    write_binary,
    write_csv,
)
from ahom.operator_core import builtin


def test_grid_cell_centred():
    g = Grid(2, 3, 6)
    ax = g.axis_coords()
    np.testing.assert_allclose(ax, 3 * (np.arange(6) / 6 - 0.5 + 1 / 12))
    assert ax[0] > -1.5 and ax[-1] < 1.5
    assert g.spacing == 0.5 and g.coords().shape == (2, 6, 6)


@pytest.mark.parametrize("args", [(2, 1, 7), (2, 0, 8), (2, 1.5, 8)])
def test_grid_rejects(args):
    with pytest.raises(ValueError):
        Grid(*args)


def test_constant_spectrum():
    g = Grid(2, 1, 8)
    spec = forward_spectrum(PeriodicField.constant(g, [2.5, -1.0]))
    np.testing.assert_allclose(spec[:, 0, 0], [2.5, -1.0])
    spec[:, 0, 0] = 0
    assert np.abs(spec).max() < 1e-14


def test_cos_mode_spectrum():
    g = Grid(2, 2, 16)
    f = PeriodicField.from_function(g, lambda x: np.stack([np.cos(2 * np.pi * x[0] / 2), 0 * x[0]]))
    spec = np.abs(forward_spectrum(f))
    support = np.argwhere(spec > 1e-12)
    assert {tuple(s) for s in support} == {(0, 1, 0), (0, 15, 0)}
    freq = g.frequencies()
    assert {int(freq[0][1, 0]), int(freq[0][15, 0])} == {1, -1}
    assert freq[0].max() == 8  # Nyquist reported as +n/2


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.sampled_from([4, 8, 12]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_roundtrip(N, n, d, seed):
    g = Grid(N, 2, n)
    f = PeriodicField(g, np.random.default_rng(seed).standard_normal((d,) + g.shape))
    back = inverse_spectrum(g, forward_spectrum(f))
    assert np.abs(back.values - f.values).max() <= 1e-12 * np.abs(f.values).max()


def test_apply_A_examples():
    g = Grid(2, 2, 32)
    div = builtin("div", N=2)
    assert np.abs(apply_A(div, PeriodicField.constant(g, [1.0, 3.0])).values).max() < 1e-13
    x = g.coords()
    f = PeriodicField(g, np.stack([np.sin(np.pi * x[0]), 0 * x[0]]))
    np.testing.assert_allclose(apply_A(div, f).values[0], np.pi * np.cos(np.pi * x[0]), atol=1e-12)
    f2 = PeriodicField(g, np.stack([0 * x[0], np.sin(np.pi * x[0])]))
    assert np.abs(apply_A(div, f2).values).max() < 1e-13


@settings(max_examples=30, deadline=None)
@given(st.integers(-7, 7), st.integers(-7, 7), st.integers(1, 3), st.floats(0, 2 * np.pi))
def test_apply_A_single_mode_exact(k1, k2, R, phase):
    g = Grid(2, R, 16)
    x = g.coords()
    arg = 2 * np.pi * (k1 * x[0] + k2 * x[1]) / R + phase
    u = np.stack([np.cos(arg), 2 * np.sin(arg)])
    curl = builtin("curl(1,2)")
    # d_1 u_2 - d_2 u_1
    expected = (2 * np.pi / R) * (2 * k1 * np.cos(arg) + k2 * np.sin(arg))
    got = apply_A(curl, PeriodicField(g, u)).values[0]
    assert np.abs(got - expected).max() <= 1e-10 * (1 + np.abs(expected).max())


def test_apply_A_dimension_mismatch():
    g = Grid(2, 1, 8)
    with pytest.raises(ValueError):
        apply_A(builtin("div", N=3), PeriodicField(g, np.zeros((3, 8, 8))))
    with pytest.raises(ValueError):
        apply_A(builtin("div", N=2), PeriodicField(g, np.zeros((3, 8, 8))))


def test_norm_examples():
    g = Grid(2, 1, 16)
    x = g.coords()
    cos = PeriodicField(g, np.stack([np.cos(2 * np.pi * x[0]), np.zeros_like(x[0])]))
    assert np.abs(mean(cos)).max() < 1e-13
    assert l1_norm(PeriodicField.constant(g, [-3.0, 0.0])) == pytest.approx(3.0, abs=1e-14)
    a = 1.7
    sin = PeriodicField(g, np.stack([a * np.sin(2 * np.pi * x[1]), np.zeros_like(x[0])]))
    assert l2_norm(sin) == pytest.approx(a / np.sqrt(2), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    g = Grid(3, 1, 8)
    f = PeriodicField(g, np.random.default_rng(seed).standard_normal((2,) + g.shape))
    spec = forward_spectrum(f)
    assert abs(l2_norm(f) ** 2 - np.sum(np.abs(spec) ** 2)) <= 1e-10 * l2_norm(f) ** 2


def test_refinement_consistency(rng):
    # random field with modes |k| <= n/4, resampled on a grid with 2n points per axis
    n, R = 8, 2
    coefs = rng.standard_normal((3, 3, 2))
    def field_on(grid):
        x = grid.coords()
        v = np.zeros(grid.shape)
        for k1 in range(3):
            for k2 in range(3):
                arg = 2 * np.pi * (k1 * x[0] + (k2 - 1) * x[1]) / R
                v += coefs[k1, k2, 0] * np.cos(arg) + coefs[k1, k2, 1] * np.sin(arg)
        return PeriodicField(grid, np.stack([v, v**0]))
    coarse, fine = field_on(Grid(2, R, n)), field_on(Grid(2, R, 2 * n))
    np.testing.assert_allclose(mean(coarse), mean(fine), atol=1e-10)
    assert l2_norm(coarse) == pytest.approx(l2_norm(fine), abs=1e-10)
    # |.|_1 of a trig polynomial is not integrated exactly by a grid rule, use a pure mode
    g1, g2 = Grid(2, R, n), Grid(2, R, 2 * n)
    mode = lambda g: PeriodicField.from_function(g, lambda x: np.stack([np.cos(2 * np.pi * x[0] / R) ** 2]))
    assert l1_norm(mode(g1)) == pytest.approx(l1_norm(mode(g2)), abs=1e-10)


def test_shift_is_periodic_roll():
    g = Grid(2, 1, 8)
    f = PeriodicField.from_function(g, lambda x: np.stack([np.sin(2 * np.pi * x[0]) + x[1] * 0]))
    s = f.shifted([2, 0])
    x = g.coords()
    np.testing.assert_allclose(s.values[0], np.sin(2 * np.pi * (x[0] + 2 * g.spacing)), atol=1e-12)


def test_snapshots_roundtrip(tmp_path, rng):
    g = Grid(2, 3, 6)
    f = PeriodicField(g, rng.standard_normal((2,) + g.shape))
    write_binary(f, tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert len(raw) == 32 + 8 * 2 * 36
    assert np.frombuffer(raw[:32], "<i8").tolist() == [2, 6, 3, 2]
    back = read_binary(tmp_path / "f.bin")
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)
    write_csv(f, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,u0,u1" and len(lines) == 37
    back = read_csv(tmp_path / "f.csv", R=3)
    np.testing.assert_allclose(back.values, f.values, rtol=1e-15)


def test_field_rejects_nonfinite():
    with pytest.raises(ValueError):
        PeriodicField(Grid(2, 1, 4), np.full((1, 4, 4), np.nan))
