"""Cell problem for the homogenized density.

For fixed ``b`` and period ``R`` the solver minimises the grid average of
``f(x, b + w(x))`` over A-free, mean-zero, ``RQ``-periodic fields ``w``; the
homogenized density is the minimum over a finite list of ``R``.

The feasible set is a linear subspace with an exact orthogonal projector, so
the minimisation is accelerated projected gradient (FISTA with backtracking
and function-value restarts) on a Huber-smoothed objective, with the
smoothing parameter halved from ``0.1 (1 + |b|)`` down to
``delta_min (1 + |b|)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ahom.fields import Grid, PeriodicField, apply_A, l2_norm, mean
from ahom.integrands import Integrand
from ahom.operator_core import Operator
from ahom.projection import build_plan, project_values, random_afree

log = logging.getLogger(__name__)


class SolverDivergence(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass
class SolverOptions:
    max_iter: int = 2000  # per smoothing stage
    rel_tol: float = 1e-9
    patience: int = 5
    value_tol: float = 1e-3
    n_starts: int = 5
    start_max_mode: int = 4
    seed: int = 0
    delta0: float = 0.1  # times (1 + |b|)
    delta_min: float = 1e-4  # times (1 + |b|)
    plan_tol: float = 1e-10
    workers: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "SolverOptions":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"solver.{sorted(unknown)[0]}")
        return cls(**doc)


@dataclass
class Diagnostics:
    iterations: int
    final_step_norm: float
    start_values: list
    spread: float
    residual_A: float
    residual_mean: float
    best_start: int
    stages: int

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_step_norm": self.final_step_norm,
            "spread": self.spread,
            "residual_A": self.residual_A,
            "residual_mean": self.residual_mean,
            "best_start": self.best_start,
            "stages": self.stages,
        }


@dataclass
class CellSolution:
    value: float
    minimizer: PeriodicField
    R: int
    grid: Grid
    b: np.ndarray
    zero_value: float  # grid average of f(x, b), the w = 0 competitor
    diagnostics: Diagnostics

    def to_record(self) -> dict:
        rec = {"b": [float(t) for t in self.b], "R": self.R, "n": self.grid.n, "value": self.value,
               "zero_value": self.zero_value}
        rec.update(self.diagnostics.as_dict())
        return rec


@dataclass
class HomDensityResult:
    b: np.ndarray
    per_R_values: dict
    errors: dict = field(default_factory=dict)

    @property
    def f_hom_estimate(self) -> float:
        if not self.per_R_values:
            return math.nan
        return min(sol.value for sol in self.per_R_values.values())

    @property
    def best_R(self) -> int:
        return min(self.per_R_values, key=lambda R: (self.per_R_values[R].value, R))


class _CellObjective:
    def __init__(self, f: Integrand, b: np.ndarray, grid: Grid):
        self.kernel = f.kernel
        self.a = f.coefficient(grid.coords())
        self.b = b.reshape((-1,) + (1,) * grid.N)

    def value(self, w, delta=0.0):
        return float(np.mean(self.a * self.kernel.value(self.b + w, delta)))

    def grad(self, w, delta=0.0):
        return self.a * self.kernel.grad(self.b + w, delta)


def _sqnorm(v):
    return float(np.mean(np.sum(v * v, axis=0)))


def _fista(obj, plan, w, delta, opts, tau, workers):
    """Minimise the delta-smoothed objective over range(P) starting from ``w``.

    Returns the final iterate, best raw-objective iterate and its value,
    iteration count, last step norm and the final step size.
    """
    Jw = obj.value(w, delta)
    raw_best, w_best = obj.value(w), w
    y, Jy, t = w, Jw, 1.0
    calm, step_norm, it = 0, 0.0, 0
    for it in range(1, opts.max_iter + 1):
        g = project_values(plan, obj.grad(y, delta), workers)
        gg = _sqnorm(g)
        if gg <= 1e-30 * (1.0 + Jy * Jy):
            break
        while True:
            w_new = y - tau * g
            J_new = obj.value(w_new, delta)
            if J_new <= Jy - 0.5 * tau * gg or tau < 1e-16:
                break
            tau *= 0.5
        if not math.isfinite(J_new):
            raise SolverDivergence("non-finite objective value")
        if J_new > Jw and t > 1.0:
            # momentum overshoot: restart from the last accepted iterate
            y, Jy, t = w, Jw, 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        diff = w_new - w
        step_norm = math.sqrt(_sqnorm(diff))
        rel = (Jw - J_new) / max(abs(J_new), 1e-300)
        w, Jw = w_new, J_new
        raw = obj.value(w)
        if raw < raw_best:
            raw_best, w_best = raw, w
        y = w + ((t - 1.0) / t_new) * diff
        t = t_new
        Jy = obj.value(y, delta)
        tau *= 1.25
        calm = calm + 1 if rel < opts.rel_tol else 0
        if calm >= opts.patience:
            break
    return w, w_best, raw_best, it, step_norm, tau


def _run_start(obj, plan, w0, b, f, opts, workers):
    scale = 1.0 + float(np.linalg.norm(b))
    amax = f.coefficient.bounds[1]
    if f.kernel.needs_smoothing:
        deltas = []
        delta = opts.delta0 * scale
        while delta > opts.delta_min * scale:
            deltas.append(delta)
            delta *= 0.5
        deltas.append(opts.delta_min * scale)
    else:
        deltas = [0.0]
    w = w0
    best_val, best_w = obj.value(w), w
    iters, step = 0, 0.0
    tau = deltas[0] / amax if deltas[0] > 0 else 0.5 / amax
    for delta in deltas:
        w, w_b, v_b, n_it, step, tau = _fista(obj, plan, w, delta, opts, tau, workers)
        iters += n_it
        if v_b < best_val:
            best_val, best_w = v_b, w_b
    return best_w, best_val, iters, step, len(deltas)


def solve_cell(f: Integrand, op: Operator, b, R: int = 1, grid: Grid | None = None,
               opts: SolverOptions | None = None, points_per_cell: int = 32) -> CellSolution:
    """Discrete inner infimum for fixed ``b`` and period ``R``."""
    opts = opts or SolverOptions()
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if grid is None:
        grid = Grid.for_cell(op.N, R, points_per_cell)
    if grid.R != R:
        raise ValueError(f"grid period {grid.R} does not match R={R}")
    if b.shape != (op.d,):
        raise ValueError(f"b has shape {b.shape}, operator expects d={op.d}")
    plan = build_plan(op, grid, opts.plan_tol)
    obj = _CellObjective(f, b, grid)
    workers = opts.workers
    zero = np.zeros((op.d,) + grid.shape)
    zero_value = obj.value(zero)

    results = []
    for s in range(max(opts.n_starts, 1)):
        if s == 0:
            w0 = zero
        else:
            rng = np.random.default_rng([opts.seed, s])
            w0 = random_afree(plan, rng, opts.start_max_mode, float(np.linalg.norm(b)) + 1.0)
        w, val, iters, step, stages = _run_start(obj, plan, w0, b, f, opts, workers)
        if not math.isfinite(val) or val > 10 * (obj.value(w0) + 1.0):
            raise SolverDivergence(f"start {s} diverged (value {val})")
        results.append((val, s, w, iters, step, stages))

    # deterministic pick: lowest value, ties by start index
    val, s_best, w, iters, step, stages = min(results, key=lambda r: (r[0], r[1]))
    w = project_values(plan, w, workers)
    val = obj.value(w)
    start_values = [r[0] for r in results]
    wf = PeriodicField(grid, w)
    diag = Diagnostics(
        iterations=sum(r[3] for r in results),
        final_step_norm=step,
        start_values=start_values,
        spread=float(max(start_values) - min(start_values)),
        residual_A=l2_norm(apply_A(op, wf, workers)),
        residual_mean=float(np.abs(mean(wf)).max()),
        best_start=s_best,
        stages=stages,
    )
    return CellSolution(val, wf, R, grid, b, zero_value, diag)


def f_hom(f: Integrand, op: Operator, b, R_list=(1, 2, 3, 4), points_per_cell: int = 32,
          opts: SolverOptions | None = None) -> HomDensityResult:
    """Homogenized density at ``b``: minimum of the cell values over ``R_list``.

    Resolution is fixed per unit cell, so the cell ``RQ`` gets
    ``R * points_per_cell`` points per axis.
    """
    R_list = list(R_list)
    if not R_list:
        raise ValueError("R_list must be nonempty")
    if R_list != sorted(R_list):
        raise ValueError("R_list must be ascending")
    b = np.atleast_1d(np.asarray(b, dtype=float))
    res = HomDensityResult(b, {})
    for R in R_list:
        try:
            res.per_R_values[R] = solve_cell(f, op, b, R, opts=opts, points_per_cell=points_per_cell)
        except (SolverDivergence, FloatingPointError) as exc:
            log.warning("cell solve failed at b=%s R=%d: %s", b, R, exc)
            res.errors[R] = str(exc)
    if not res.per_R_values:
        raise SolverDivergence(f"all cell solves failed at b={b}", res.errors)
    return res


def fhom_callable(f: Integrand, op: Operator, R_list=(1,), points_per_cell: int = 16,
                  opts: SolverOptions | None = None):
    """Memoised ``b -> f_hom(b)`` closure backed by the cell solver."""
    cache: dict = {}

    def fn(b):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        key = tuple(np.round(b, 14))
        if key not in cache:
            cache[key] = f_hom(f, op, b, R_list, points_per_cell, opts).f_hom_estimate
        return cache[key]

    return fn


class PolarTable:
    """Tabulated positively 1-homogeneous density in d = 2: ``g(theta) * |b|``.

    Periodic linear interpolation in the angle.
    """

    def __init__(self, angles, values):
        self.angles = np.asarray(angles, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @classmethod
    def build(cls, fn, n_angles: int = 64) -> "PolarTable":
        th = 2 * np.pi * np.arange(n_angles) / n_angles
        return cls(th, [fn(np.array([math.cos(t), math.sin(t)])) for t in th])

    def __call__(self, b) -> float:
        b = np.asarray(b, dtype=float)
        r = np.linalg.norm(b, axis=0)
        th = np.mod(np.arctan2(b[1], b[0]), 2 * np.pi)
        g = np.interp(th, np.append(self.angles, 2 * np.pi), np.append(self.values, self.values[0]))
        return r * g


class GridTable:
    """Tabulated density on a rectilinear grid of ``b`` values (linear interpolation)."""

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self._interp = RegularGridInterpolator(self.axes, np.asarray(values, dtype=float))

    @classmethod
    def build(cls, fn, axes) -> "GridTable":
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.array([fn(p) for p in mesh.reshape(-1, len(axes))]).reshape(mesh.shape[:-1])
        return cls(axes, vals)

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        pts = np.moveaxis(b, 0, -1)
        return self._interp(pts)


@dataclass
class AqcReport:
    margins: list  # average f(b + w) - f(b) per test
    tolerances: list  # value_tol + quadrature budget per test
    quad_errors: list
    violations: int
    worst_margin: float


def aqc_check(fhom, op: Operator, n_tests: int = 20, seed: int = 0, b_scale: float = 1.0,
              amplitude: float = 1.0, n_quad: int = 16, max_mode: int = 2,
              value_tol: float = 1e-3, vectorized: bool = False) -> AqcReport:
    """Test ``f(b) <= avg_Q f(b + w)`` for random b and low-mode A-free mean-zero w.

    ``fhom`` maps a d-vector to a value (or a ``(d, ...)`` stack when
    ``vectorized``). The quadrature error of each average is estimated by
    comparing ``n_quad`` and ``2 n_quad`` points per axis.
    """
    rng = np.random.default_rng(seed)
    fine = Grid(op.N, 1, 2 * n_quad)
    plan = build_plan(op, fine)
    stride = (slice(None),) + (slice(None, None, 2),) * op.N

    def avg(vals):
        if vectorized:
            return float(np.mean(fhom(vals)))
        flat = vals.reshape(op.d, -1).T
        return float(np.mean([fhom(p) for p in flat]))

    margins, tols, qerrs = [], [], []
    for _ in range(n_tests):
        b = b_scale * rng.standard_normal(op.d)
        w = random_afree(plan, rng, max_mode, amplitude * rng.uniform(0.2, 1.0))
        bb = b.reshape((-1,) + (1,) * op.N)
        fine_avg = avg(bb + w)
        coarse_avg = avg((bb + w)[stride])
        qerr = abs(fine_avg - coarse_avg)
        fb = float(fhom(b[:, None])[0]) if vectorized else float(fhom(b))
        margins.append(fine_avg - fb)
        qerrs.append(qerr)
        tols.append(value_tol + qerr)
    viol = sum(m < -t for m, t in zip(margins, tols))
    return AqcReport(margins, tols, qerrs, int(viol), float(min(margins)))
