"""Periodic vector fields sampled on a cell-centred grid over ``R*Q``.

Spectra are normalised so that the zero-frequency coefficient is the mean.
Phases are referenced to the first grid point, which does not matter for any
of the diagonal (per-frequency) operators used here.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from ahom.operator_core import Operator

_HEADER = struct.Struct("<4q")  # N, n, R, d -> 32 bytes


@dataclass(frozen=True)
class Grid:
    N: int
    R: int
    n: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.R < 1 or int(self.R) != self.R:
            raise ValueError(f"R must be a positive integer, got {self.R}")
        if self.n < 2 or self.n % 2:
            raise ValueError(f"points per axis must be a positive even integer, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def spacing(self) -> float:
        return self.R / self.n

    @property
    def lengths(self) -> tuple[float, ...]:
        return (float(self.R),) * self.N

    def axis_coords(self) -> np.ndarray:
        k = np.arange(self.n)
        return self.R * (k / self.n - 0.5 + 0.5 / self.n)

    def coords(self) -> np.ndarray:
        """Cell-centre coordinates, shape ``(N, n, ..., n)``."""
        ax = self.axis_coords()
        return np.stack(np.meshgrid(*([ax] * self.N), indexing="ij"))

    def frequencies(self) -> np.ndarray:
        """Integer frequencies in ``(-n/2, n/2]`` per axis, shape ``(N, n, ..., n)``."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        k[self.n // 2] = self.n // 2
        return np.stack(np.meshgrid(*([k] * self.N), indexing="ij"))

    @classmethod
    def for_cell(cls, N: int, R: int, points_per_cell: int) -> "Grid":
        return cls(N, R, R * points_per_cell)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    grid: Grid
    values: np.ndarray  # (d, n, ..., n)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == self.grid.N:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, grid: Grid, c) -> "PeriodicField":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(grid, np.broadcast_to(c.reshape((-1,) + (1,) * grid.N), (c.size,) + grid.shape).copy())

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "PeriodicField":
        """``fn`` maps coordinates ``(N, ...)`` to values ``(d, ...)``."""
        return cls(grid, np.asarray(fn(grid.coords()), dtype=float))

    def __add__(self, other):
        return PeriodicField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return PeriodicField(self.grid, self.values - other.values)

    def __mul__(self, s):
        return PeriodicField(self.grid, self.values * s)

    __rmul__ = __mul__

    def shifted(self, steps) -> "PeriodicField":
        """Periodic shift by whole grid cells: ``out(x) = self(x + steps*h)``."""
        axes = tuple(range(1, self.grid.N + 1))
        return PeriodicField(self.grid, np.roll(self.values, [-s for s in steps], axis=axes))


def _spatial_axes(values: np.ndarray) -> tuple[int, ...]:
    return tuple(range(1, values.ndim))


def forward_spectrum(field: PeriodicField, workers: int | None = None) -> np.ndarray:
    v = field.values
    return sfft.fftn(v, axes=_spatial_axes(v), workers=workers) / np.prod(v.shape[1:])


def inverse_spectrum(grid: Grid, spectrum: np.ndarray, workers: int | None = None) -> PeriodicField:
    axes = _spatial_axes(spectrum)
    out = sfft.ifftn(spectrum * np.prod(spectrum.shape[1:]), axes=axes, workers=workers)
    return PeriodicField(grid, out.real)


def symmetric_wavevectors(shape, lengths, real: bool = False) -> np.ndarray:
    """Angular wavevectors ``2*pi*k/L`` with Nyquist components set to zero.

    Zeroing the Nyquist component is the average of its two aliases, which is
    what a real trigonometric interpolant differentiates to at the samples.
    With ``real=True`` the last axis is laid out as for ``rfftn``.
    """
    ks = []
    for ax, (n, L) in enumerate(zip(shape, lengths)):
        last = real and ax == len(shape) - 1
        k = np.fft.rfftfreq(n, 1.0 / n) if last else np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            k[np.abs(k) == n // 2] = 0.0
        ks.append(2 * np.pi * k / L)
    return np.stack(np.meshgrid(*ks, indexing="ij"))


def spectral_apply(op: Operator, values: np.ndarray, lengths, workers: int | None = None) -> np.ndarray:
    """Apply ``A`` to a periodic field on a box with the given side lengths."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != op.d:
        raise ValueError(f"field has {values.shape[0]} components, operator expects d={op.d}")
    if values.ndim - 1 != op.N:
        raise ValueError(f"field lives in {values.ndim - 1} dimensions, operator has N={op.N}")
    shape = values.shape[1:]
    axes = _spatial_axes(values)
    spec = sfft.rfftn(values, axes=axes, workers=workers)
    kvec = symmetric_wavevectors(shape, lengths, real=True)
    # out_m = sum_i sum_j A^(i)_{mj} * (i k_i) * spec_j
    out = 1j * np.einsum("imj,i...,j...->m...", op.coefficients, kvec, spec, optimize=True)
    return sfft.irfftn(out, s=shape, axes=axes, workers=workers)


def apply_A(op: Operator, field: PeriodicField, workers: int | None = None) -> PeriodicField:
    if op.N != field.grid.N:
        raise ValueError(f"operator N={op.N} does not match grid N={field.grid.N}")
    return PeriodicField(field.grid, spectral_apply(op, field.values, field.grid.lengths, workers))


def mean(field: PeriodicField) -> np.ndarray:
    return field.values.reshape(field.d, -1).mean(axis=1)


def l1_norm(field: PeriodicField) -> float:
    return float(np.mean(np.linalg.norm(field.values, axis=0)))


def l2_norm(field: PeriodicField) -> float:
    return float(np.sqrt(np.mean(np.sum(field.values**2, axis=0))))


def inner(f: PeriodicField, g: PeriodicField) -> float:
    """Cell-averaged L2 inner product."""
    return float(np.mean(np.sum(f.values * g.values, axis=0)))


# -- snapshots --------------------------------------------------------------

def write_csv(field: PeriodicField, path) -> None:
    g = field.grid
    X = g.coords().reshape(g.N, -1).T
    V = field.values.reshape(field.d, -1).T
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(g.N)] + [f"u{j}" for j in range(field.d)])
        for x, v in zip(X, V):
            w.writerow([f"{t:.16e}" for t in x] + [f"{t:.16e}" for t in v])


def read_csv(path, R: int = 1) -> PeriodicField:
    """Read a CSV snapshot; ``R`` is the period multiplier (not stored in CSV)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    N = sum(h.startswith("x") for h in header)
    d = len(header) - N
    n = round(len(data) ** (1.0 / N))
    if n**N != len(data):
        raise ValueError("CSV snapshot is not a full cubic grid")
    grid = Grid(N, R, n)
    return PeriodicField(grid, data[:, N:].T.reshape((d,) + grid.shape))


def write_binary(field: PeriodicField, path) -> None:
    g = field.grid
    body = np.moveaxis(field.values, 0, -1).astype("<f8").tobytes()
    Path(path).write_bytes(_HEADER.pack(g.N, g.n, g.R, field.d) + body)


def read_binary(path) -> PeriodicField:
    raw = Path(path).read_bytes()
    N, n, R, d = _HEADER.unpack_from(raw)
    grid = Grid(N, R, n)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(grid.shape + (d,))
    return PeriodicField(grid, np.moveaxis(vals, -1, 0).copy())
