"""Batch front end.

    ahom --config run.json [--task hom|recession|cone|check|functional]
         [--out DIR] [--seed N] [--threads N]

The config is one JSON document. Every CSV row carries a short hash of the
effective config; numbers are written with 17 significant digits.
Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ahom import checks
from ahom.cell import SolverDivergence, SolverOptions, f_hom
from ahom.integrands import Coefficient, Integrand, make_integrand
from ahom.measure import MeasureSpec, evaluate, is_A_free_witness
from ahom.operator_core import ConstantRankError, Operator, builtin, characteristic_cone, check_constant_rank
from ahom.recession import DEFAULT_T, recession, recession_of_fhom

log = logging.getLogger("ahom")

TASKS = ("hom", "recession", "cone", "check", "functional")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


class ConfigError(Exception):
    def __init__(self, key, msg):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


@dataclass
class RunConfig:
    task: str
    operator: Operator
    integrand: Integrand
    b_samples: np.ndarray
    R_list: list
    points_per_cell: int
    solver: SolverOptions
    seed: int
    threads: int
    output: Path
    raw: dict
    t_schedule: tuple = DEFAULT_T
    cone_samples: int = 500
    measure: MeasureSpec | None = None
    etas: tuple = (1 / 32, 1 / 64)
    fhom_mode: str = "solver"

    @property
    def config_hash(self) -> str:
        doc = {k: v for k, v in self.raw.items() if k not in ("output", "threads")}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.16e}"


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(x) for x in r])


def _parse_operator(spec, N, base: Path) -> Operator:
    if isinstance(spec, str):
        p = base / spec
        if spec.endswith(".json"):
            if not p.exists():
                raise ConfigError("operator", f"file {p} does not exist")
            return Operator.from_json(p.read_text())
        return builtin(spec, N=N)
    if isinstance(spec, dict):
        if "A" in spec:
            return Operator.from_dict(spec)
        if "builtin" in spec:
            return builtin(spec["builtin"], N=spec.get("N", N), m=spec.get("m", 1))
    raise ConfigError("operator", "expected a builtin name, a matrix document or a .json path")


def _parse_b(spec, d, rng) -> np.ndarray:
    if isinstance(spec, dict):
        if "unit_sphere" in spec:
            k = int(spec["unit_sphere"])
            if d == 2:
                th = 2 * np.pi * np.arange(k) / k
                return np.stack([np.cos(th), np.sin(th)], axis=1)
            v = rng.standard_normal((k, d))
            return v / np.linalg.norm(v, axis=1, keepdims=True)
        if "grid" in spec:
            g = spec["grid"]
            ax = np.linspace(g["lo"], g["hi"], int(g["points"]))
            return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
        if "random" in spec:
            return float(spec.get("scale", 1.0)) * rng.standard_normal((int(spec["random"]), d))
        raise ConfigError("b_samples", "expected a list, unit_sphere, grid or random")
    b = np.atleast_2d(np.asarray(spec, dtype=float))
    if b.shape[1] != d:
        raise ConfigError("b_samples", f"vectors must have d={d} components")
    return b


def load_config(doc: dict, base: Path = Path("."), overrides: dict | None = None) -> RunConfig:
    doc = dict(doc)
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    task = doc.get("task")
    if task not in TASKS:
        raise ConfigError("task", f"must be one of {TASKS}")
    N = doc.get("N")
    try:
        op = _parse_operator(doc.get("operator", "div"), N, base)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError("operator", str(exc)) from exc
    if N is not None and N != op.N:
        raise ConfigError("N", f"operator has N={op.N}")
    doc["N"] = op.N

    ispec = dict(doc.get("integrand", {"family": "norm"}))
    try:
        family = ispec.pop("family")
        coef = ispec.pop("coefficient", None)
        f = make_integrand(family, Coefficient(**coef) if coef else None, **ispec)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError("integrand", str(exc)) from exc
    if family == "anisotropic" and f.kernel.matrix.shape[0] != op.d:
        raise ConfigError("integrand", f"matrix must be {op.d}x{op.d}")
    if family == "nonconvex" and f.kernel.p.shape != (op.d,):
        raise ConfigError("integrand", f"p must have {op.d} components")

    seed = int(doc.get("seed", 0))
    doc["seed"] = seed
    rng = np.random.default_rng(seed)
    b = _parse_b(doc.get("b_samples", [[1.0] + [0.0] * (op.d - 1)]), op.d, rng)

    R_list = doc.get("R_list", [1, 2, 3, 4])
    if not R_list or sorted(R_list) != list(R_list) or any(int(r) != r or r < 1 for r in R_list):
        raise ConfigError("R_list", "must be a nonempty ascending list of positive integers")
    ppc = int(doc.get("points_per_cell", 32))
    if ppc < 2 or ppc % 2:
        raise ConfigError("points_per_cell", "must be a positive even integer")
    try:
        solver = SolverOptions.from_dict({**doc.get("solver", {}), "seed": seed})
    except (KeyError, TypeError) as exc:
        raise ConfigError("solver", str(exc)) from exc
    threads = int(doc.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads", "must be >= 1")

    cfg = RunConfig(task, op, f, b, [int(r) for r in R_list], ppc, solver, seed, threads,
                    Path(doc.get("output", "out")), doc)
    rec = doc.get("recession", {})
    if "t_schedule" in rec:
        cfg.t_schedule = tuple(float(t) for t in rec["t_schedule"])
    elif rec:
        cfg.t_schedule = tuple(2.0**k for k in range(int(rec.get("t_min_exp", 4)), int(rec.get("t_max_exp", 14)) + 1))
    cfg.cone_samples = int(doc.get("cone", {}).get("n_dir_samples", 500))
    if task == "functional":
        if "measure" not in doc:
            raise ConfigError("measure", "required for task=functional")
        try:
            cfg.measure = MeasureSpec.from_dict(doc["measure"], base)
        except (ValueError, KeyError, FileNotFoundError) as exc:
            raise ConfigError("measure", str(exc)) from exc
        fun = doc.get("functional", {})
        cfg.etas = tuple(float(e) for e in fun.get("etas", cfg.etas))
        cfg.fhom_mode = fun.get("fhom", "solver")
        if cfg.fhom_mode not in ("solver", "integrand"):
            raise ConfigError("functional", "fhom must be 'solver' or 'integrand'")
    return cfg


# -- tasks --------------------------------------------------------------------

def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


def task_hom(cfg: RunConfig) -> int:
    d = cfg.operator.d

    def one(b):
        try:
            return f_hom(cfg.integrand, cfg.operator, b, cfg.R_list, cfg.points_per_cell, cfg.solver)
        except SolverDivergence as exc:
            return exc

    results = _pmap(one, list(cfg.b_samples), cfg.threads)
    h = cfg.config_hash
    bh = [f"b{i}" for i in range(d)]
    rows, mins, failed = [], [], 0
    for b, res in zip(cfg.b_samples, results):
        if isinstance(res, Exception):
            failed += 1
            for R in cfg.R_list:
                rows.append([h, *b, R, R * cfg.points_per_cell, math.nan, math.nan, 0, math.nan, math.nan,
                             math.nan, "failed"])
            mins.append([h, *b, math.nan, 0, "failed"])
            continue
        for R in cfg.R_list:
            if R in res.per_R_values:
                s = res.per_R_values[R]
                dg = s.diagnostics
                rows.append([h, *b, R, s.grid.n, s.value, s.zero_value, dg.iterations, dg.spread,
                             dg.residual_A, dg.residual_mean, "ok"])
            else:
                rows.append([h, *b, R, R * cfg.points_per_cell, math.nan, math.nan, 0, math.nan, math.nan,
                             math.nan, "failed"])
        mins.append([h, *b, res.f_hom_estimate, res.best_R, "ok"])
    _write(cfg.output / "hom.csv",
           ["config_hash", *bh, "R", "n", "value", "zero_value", "iterations", "spread", "residual_A",
            "residual_mean", "status"], rows)
    _write(cfg.output / "hom_min.csv", ["config_hash", *bh, "f_hom", "best_R", "status"], mins)
    return EXIT_NUMERIC if failed == len(results) else EXIT_OK


def task_recession(cfg: RunConfig) -> int:
    d = cfg.operator.d

    def one(b):
        try:
            return recession_of_fhom(cfg.integrand, cfg.operator, b, cfg.t_schedule, cfg.R_list,
                                     cfg.points_per_cell, cfg.solver)
        except (SolverDivergence, ArithmeticError) as exc:
            return exc

    ests = _pmap(one, list(cfg.b_samples), cfg.threads)
    h = cfg.config_hash
    bh = [f"b{i}" for i in range(d)]
    rows, summ, failed = [], [], 0
    for b, est in zip(cfg.b_samples, ests):
        if isinstance(est, Exception):
            failed += 1
            summ.append([h, *b, math.nan, False, False, 0, "failed"])
            continue
        for t, r in est.rows():
            rows.append([h, *b, t, r])
        summ.append([h, *b, est.estimate, est.monotone_certified, est.expect_monotone, len(est.warnings), "ok"])
        for msg in est.warnings:
            log.warning("b=%s: %s", b.tolist(), msg)
    _write(cfg.output / "recession.csv", ["config_hash", *bh, "t", "ratio"], rows)
    _write(cfg.output / "recession_summary.csv",
           ["config_hash", *bh, "estimate", "monotone_certified", "expect_monotone", "warnings", "status"], summ)
    return EXIT_NUMERIC if failed == len(ests) else EXIT_OK


def task_cone(cfg: RunConfig) -> int:
    op = cfg.operator
    c, ok = check_constant_rank(op)
    h = cfg.config_hash
    if ok:
        rep = characteristic_cone(op, cfg.cone_samples)
        span, h2 = rep.span_dim, rep.h2_satisfied
        rows = [[h, *v, *w, r] for v, w, r in zip(rep.cone_samples, rep.witness_directions, rep.residuals)]
    else:
        log.error("operator %s fails the constant-rank condition", op.name)
        span, h2, rows = 0, False, []
    _write(cfg.output / "cone.csv",
           ["config_hash", *[f"v{i}" for i in range(op.d)], *[f"w{i}" for i in range(op.N)], "residual"], rows)
    _write(cfg.output / "cone_summary.csv",
           ["config_hash", "operator", "N", "M", "d", "rank_c", "h1_satisfied", "span_dim", "h2_satisfied"],
           [[h, op.name, op.N, op.M, op.d, c, ok, span, h2]])
    return EXIT_OK


def task_check(cfg: RunConfig) -> int:
    ppc = min(cfg.points_per_cell, 16)
    results = checks.run_all(cfg.operator, cfg.integrand, cfg.seed, cfg.solver, ppc)
    h = cfg.config_hash
    _write(cfg.output / "check.csv", ["config_hash", "module", "property", "passed", "margin"],
           [[h, r.module, r.prop, r.passed, r.margin] for r in results])
    failed = [r for r in results if not r.passed]
    for r in failed:
        log.error("check failed: %s.%s (margin %.3g)", r.module, r.prop, r.margin)
    return EXIT_CHECK if failed else EXIT_OK


def task_functional(cfg: RunConfig) -> int:
    mu, op, f = cfg.measure, cfg.operator, cfg.integrand
    if cfg.fhom_mode == "integrand":
        # valid for x-independent convex integrands, where f_hom = f
        fh = lambda u: float(f(np.asarray(u)))
        finf = lambda v: recession(lambda z: float(f(z)), v).estimate
    else:
        cache: dict = {}

        def fh(u):
            key = tuple(u)
            if key not in cache:
                cache[key] = f_hom(f, op, u, cfg.R_list, cfg.points_per_cell, cfg.solver).f_hom_estimate
            return cache[key]

        def finf(v):
            return recession_of_fhom(f, op, v, cfg.t_schedule, cfg.R_list, cfg.points_per_cell,
                                     cfg.solver).estimate

    value = evaluate(fh, finf, mu)
    wit = is_A_free_witness(op, mu, cfg.etas)
    h = cfg.config_hash
    _write(cfg.output / "functional.csv", ["config_hash", "F"], [[h, value]])
    _write(cfg.output / "functional_witness.csv", ["config_hash", "eta", "residual_L1", "mollification_error"],
           [[h, e, r, m] for e, r, m in zip(wit.etas, wit.residuals, wit.moll_errors)])
    return EXIT_OK if math.isfinite(value) else EXIT_NUMERIC


TASK_FN = {"hom": task_hom, "recession": task_recession, "cone": task_cone, "check": task_check,
           "functional": task_functional}


def run(cfg: RunConfig) -> int:
    cfg.output.mkdir(parents=True, exist_ok=True)
    try:
        return TASK_FN[cfg.task](cfg)
    except ConstantRankError as exc:
        print(f"error: config key 'operator': {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ahom", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--out", type=str)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = json.loads(args.config.read_text())
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        cfg = load_config(doc, args.config.parent,
                          {"task": args.task, "output": args.out, "seed": args.seed, "threads": args.threads})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
