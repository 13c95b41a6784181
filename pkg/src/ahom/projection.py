"""Per-frequency orthogonal projection onto A-free, mean-zero periodic fields."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ahom.fields import Grid, PeriodicField
from ahom.operator_core import DEFAULT_TOL, ConstantRankError, Operator, check_constant_rank, symbol

_PLAN_CACHE: dict = {}


@dataclass(frozen=True, eq=False)
class ProjectorPlan:
    """Projector matrices laid out on the ``rfftn`` half spectrum.

    ``matrices`` has shape ``(d, d) + half_shape``. Frequencies whose Nyquist
    component makes the sign of the mode ambiguous (see ``ambiguous``) are
    projected onto the intersection of the kernels of all aliases, so their
    rank can be smaller than ``d - c``.
    """

    operator: Operator
    grid: Grid
    matrices: np.ndarray
    rank: int
    ambiguous: np.ndarray
    tol: float = DEFAULT_TOL

    def matrix(self, k) -> np.ndarray:
        """Projector at integer frequency ``k`` (any representative mod n)."""
        k = np.asarray(k, dtype=int) % self.grid.n
        if k[-1] > self.grid.n // 2:
            k = (-k) % self.grid.n
        return self.matrices[(slice(None), slice(None)) + tuple(k)].copy()


def _half_frequencies(grid: Grid) -> np.ndarray:
    n = grid.n
    ks = [np.fft.fftfreq(n, 1.0 / n)] * (grid.N - 1) + [np.fft.rfftfreq(n, 1.0 / n)]
    return np.stack(np.meshgrid(*ks, indexing="ij"))


def _kernel_projectors(mats: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Batched orthogonal projectors onto the numerical kernels of ``mats``."""
    K, _, d = mats.shape
    _, s, vh = np.linalg.svd(mats, full_matrices=True)
    sp = np.zeros((K, d))
    sp[:, : s.shape[1]] = s[:, :d]
    in_range = sp > tol * sp[:, :1]
    V = vh * in_range[:, :, None]
    proj = np.eye(d)[None] - np.einsum("kji,kjl->kil", V, vh)
    return proj, d - in_range.sum(axis=1)


def build_plan(op: Operator, grid: Grid, tol: float = DEFAULT_TOL, cache: bool = True) -> ProjectorPlan:
    if op.N != grid.N:
        raise ValueError(f"operator N={op.N} does not match grid N={grid.N}")
    key = (op.key(), grid, tol)
    if cache and key in _PLAN_CACHE:
        return _PLAN_CACHE[key]
    c, ok = check_constant_rank(op, tol=tol)
    if not ok:
        raise ConstantRankError("operator fails the constant-rank condition on the sphere")

    d, n = op.d, grid.n
    kgrid = _half_frequencies(grid)
    half_shape = kgrid.shape[1:]
    k = kgrid.reshape(grid.N, -1).T
    nyq = np.abs(k) == n // 2
    ambiguous = nyq.any(axis=1) & (np.count_nonzero(k, axis=1) >= 2)

    proj, nullity = _kernel_projectors(symbol(op, k), tol)
    expected = d - c
    check = ~ambiguous & np.any(k != 0, axis=1)
    bad = check & (nullity != expected)
    if bad.any():
        raise ConstantRankError(
            f"kernel dimension {nullity[bad][0]} != d - c = {expected} at frequency {k[bad][0].astype(int)}"
        )

    if ambiguous.any():
        flips = np.array(list(itertools.product([1.0, -1.0], repeat=grid.N)))
        ka = k[ambiguous]
        na = nyq[ambiguous]
        variants = np.where(na[:, None, :], flips[None] * ka[:, None, :], ka[:, None, :])
        stacked = symbol(op, variants).reshape(len(ka), -1, d)
        proj[ambiguous], _ = _kernel_projectors(stacked, tol)

    proj[np.all(k == 0, axis=1)] = 0.0
    mats = np.moveaxis(proj.reshape(half_shape + (d, d)), (-2, -1), (0, 1)).copy()
    mats.setflags(write=False)
    plan = ProjectorPlan(op, grid, mats, c, ambiguous.reshape(half_shape), tol)
    if cache:
        _PLAN_CACHE[key] = plan
    return plan


def project_values(plan: ProjectorPlan, values: np.ndarray, workers: int | None = None) -> np.ndarray:
    axes = tuple(range(1, values.ndim))
    spec = sfft.rfftn(values, axes=axes, workers=workers)
    out = np.einsum("ij...,j...->i...", plan.matrices, spec)
    return sfft.irfftn(out, s=values.shape[1:], axes=axes, workers=workers)


def project(plan: ProjectorPlan, field: PeriodicField, workers: int | None = None) -> PeriodicField:
    if field.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    if field.d != plan.operator.d:
        raise ValueError(f"field has {field.d} components, plan expects d={plan.operator.d}")
    return PeriodicField(field.grid, project_values(plan, field.values, workers))


def random_afree(plan: ProjectorPlan, rng: np.random.Generator, max_mode: int = 4,
                 norm: float = 1.0) -> np.ndarray:
    """Random A-free mean-zero field with spectrum in ``|k|_inf <= max_mode``, scaled to L2 ``norm``."""
    grid = plan.grid
    vals = rng.standard_normal((plan.operator.d,) + grid.shape)
    axes = tuple(range(1, grid.N + 1))
    spec = sfft.rfftn(vals, axes=axes)
    kgrid = _half_frequencies(grid)
    spec[:, np.abs(kgrid).max(axis=0) > max_mode] = 0.0
    vals = project_values(plan, sfft.irfftn(spec, s=grid.shape, axes=axes))
    l2 = np.sqrt(np.mean(np.sum(vals**2, axis=0)))
    return vals * (norm / l2) if l2 > 0 else vals


def negative_norm(op_values: np.ndarray, lengths) -> float:
    """Discrete W^{-1,2}-type norm: spectral blocks divided by ``|2 pi k / L|``."""
    axes = tuple(range(1, op_values.ndim))
    spec = sfft.fftn(op_values, axes=axes) / np.prod(op_values.shape[1:])
    ks = [2 * np.pi * np.fft.fftfreq(n, 1.0 / n) / L for n, L in zip(op_values.shape[1:], lengths)]
    kk = np.sqrt(sum(g**2 for g in np.meshgrid(*ks, indexing="ij")))
    kk[(0,) * len(kk.shape)] = np.inf
    return float(np.sqrt(np.sum(np.abs(spec) ** 2 / kk**2)))
