"""The limit functional on measures ``mu = u_a dx + sum of singular pieces``.

``F(mu) = int f_hom(u_a) dx + sum_pieces mass * f_hom_inf(direction)``.
Singular pieces are atoms and flat, axis-aligned surface patches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ahom.fields import read_binary, read_csv, spectral_apply
from ahom.operator_core import Operator


@dataclass(frozen=True)
class Piece:
    """Singular piece with total variation ``mass`` and unit polar ``direction``.

    ``kind="atom"``: ``location`` is a point. ``kind="surface"``: ``location``
    is ``{"axis": i, "offset": c, "extent": [[lo, hi], ...]}`` with one
    interval per tangential axis (in increasing axis order).
    """

    kind: str
    location: object
    direction: tuple
    mass: float

    @property
    def polar(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)

    def area(self) -> float:
        if self.kind == "atom":
            return 0.0
        return float(np.prod([hi - lo for lo, hi in self.location["extent"]]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "location": self.location, "direction": list(self.direction),
                "mass": self.mass}


@dataclass
class MeasureSpec:
    omega: list  # [[lo, hi], ...] per axis
    density: np.ndarray  # (d, n_1, ..., n_N), cell-centred samples over omega
    pieces: list = field(default_factory=list)

    def __post_init__(self):
        self.omega = [(float(lo), float(hi)) for lo, hi in self.omega]
        self.density = np.asarray(self.density, dtype=float)
        N = len(self.omega)
        if any(hi <= lo for lo, hi in self.omega):
            raise ValueError("omega intervals must have lo < hi")
        if self.density.ndim != N + 1:
            raise ValueError(f"density must have shape (d, n_1..n_{N})")
        if not np.all(np.isfinite(self.density)):
            raise ValueError("density must be finite")
        self.pieces = [p if isinstance(p, Piece) else Piece(**p) for p in self.pieces]
        for p in self.pieces:
            self._validate(p)

    @property
    def N(self) -> int:
        return len(self.omega)

    @property
    def d(self) -> int:
        return self.density.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.omega]))

    def _validate(self, p: Piece) -> None:
        if p.kind not in ("atom", "surface"):
            raise ValueError(f"unknown piece kind {p.kind!r}")
        v = p.polar
        if v.shape != (self.d,):
            raise ValueError(f"piece direction has {v.size} components, density has d={self.d}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError(f"piece direction {list(p.direction)} is not a unit vector")
        if not p.mass > 0:
            raise ValueError("piece mass must be positive")
        if p.kind == "atom":
            x = np.asarray(p.location, dtype=float)
            if x.shape != (self.N,) or any(not lo < xi < hi for xi, (lo, hi) in zip(x, self.omega)):
                raise ValueError("atoms must lie in the open domain")
        else:
            loc = p.location
            ax, off = int(loc["axis"]), float(loc["offset"])
            lo, hi = self.omega[ax]
            if not lo < off < hi:
                raise ValueError("surface offset must lie strictly inside the domain")
            tang = [i for i in range(self.N) if i != ax]
            ext = loc["extent"]
            if len(ext) != len(tang):
                raise ValueError("surface extent needs one interval per tangential axis")
            for i, (a, b) in zip(tang, ext):
                if not (self.omega[i][0] <= a < b <= self.omega[i][1]):
                    raise ValueError("surface extent must lie inside the domain")

    def total_variation(self) -> float:
        cell = self.volume / np.prod(self.density.shape[1:])
        return float(np.sum(np.linalg.norm(self.density, axis=0)) * cell + sum(p.mass for p in self.pieces))

    def coords(self, shape=None) -> np.ndarray:
        shape = shape or self.density.shape[1:]
        axes = [lo + (hi - lo) * (np.arange(n) + 0.5) / n for (lo, hi), n in zip(self.omega, shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @classmethod
    def from_dict(cls, doc: dict, base: Path | None = None) -> "MeasureSpec":
        omega = doc["omega"]
        dens = doc.get("density", {})
        if isinstance(dens, str):
            dens = {"file": dens}
        if "file" in dens:
            path = Path(dens["file"])
            if base is not None and not path.is_absolute():
                path = base / path
            if not path.exists():
                raise FileNotFoundError(f"density file {path} not found")
            fld = read_binary(path) if path.suffix in (".bin", ".raw") else read_csv(path)
            values = fld.values
        elif "constant" in dens:
            c = np.asarray(dens["constant"], dtype=float)
            n = int(dens.get("points", 8))
            values = np.broadcast_to(c.reshape((-1,) + (1,) * len(omega)), (c.size,) + (n,) * len(omega)).copy()
        else:
            raise KeyError("density")
        return cls(omega, values, [Piece(**p) for p in doc.get("pieces", [])])

    @classmethod
    def from_json(cls, text: str, base: Path | None = None) -> "MeasureSpec":
        return cls.from_dict(json.loads(text), base)


def evaluate(fhom, fhom_inf, mu: MeasureSpec) -> float:
    """Midpoint rule for the density term plus ``mass * fhom_inf(direction)`` per piece."""
    rows = mu.density.reshape(mu.d, -1).T
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    vals = np.array([float(fhom(u)) for u in uniq])
    if not np.all(np.isfinite(vals)):
        raise ValueError("f_hom returned a non-finite value on the density")
    bulk = float(np.sum(vals * counts)) * mu.volume / len(rows)
    sing = 0.0
    for p in mu.pieces:
        v = float(fhom_inf(p.polar))
        if not math.isfinite(v):
            raise ValueError(f"f_hom_inf is not finite at direction {list(p.direction)}")
        sing += p.mass * v
    return bulk + sing


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def mollify(mu: MeasureSpec, eta: float, points_per_eta: int = 8) -> tuple[np.ndarray, list]:
    """Sample ``mu`` mollified at width ``eta`` on a fine cell-centred grid."""
    lengths = [hi - lo for lo, hi in mu.omega]
    h = eta / points_per_eta
    shape = tuple(int(2 * math.ceil(L / h / 2)) for L in lengths)
    spacing = [L / n for L, n in zip(lengths, shape)]
    X = mu.coords(shape)
    # density: nearest coarse cell
    idx = []
    for ax, ((lo, hi), n_c) in enumerate(zip(mu.omega, mu.density.shape[1:])):
        idx.append(np.clip(((X[ax] - lo) / (hi - lo) * n_c).astype(int), 0, n_c - 1))
    u = mu.density[(slice(None),) + tuple(idx)].copy()
    cell = float(np.prod(spacing))
    for p in mu.pieces:
        if p.kind == "atom":
            diff = [np.remainder(X[i] - p.location[i] + L / 2, L) - L / 2 for i, L in enumerate(lengths)]
            k = _bump(np.sqrt(sum(t * t for t in diff)) / eta)
            k /= k.sum() * cell
            dens = p.mass * k
        else:
            ax = int(p.location["axis"])
            L, off = lengths[ax], float(p.location["offset"])
            s = np.remainder(X[ax] - off + L / 2, L) - L / 2
            lo = mu.omega[ax][0]
            s1 = np.remainder(lo + (np.arange(shape[ax]) + 0.5) * spacing[ax] - off + L / 2, L) - L / 2
            # unit mass per unit area across the layer
            profile = _bump(s / eta) / (_bump(s1 / eta).sum() * spacing[ax])
            mask = np.ones(shape, dtype=bool)
            tang = [i for i in range(mu.N) if i != ax]
            for i, (a, b) in zip(tang, p.location["extent"]):
                mask &= (X[i] >= a) & (X[i] <= b)
            dens = (p.mass / p.area()) * profile * mask
        u += p.polar.reshape((-1,) + (1,) * mu.N) * dens
    return u, spacing


@dataclass
class WitnessReport:
    etas: list
    residuals: list  # L1 norm of A(mollified mu) per eta
    moll_errors: list  # eta * total variation
    decreasing: bool

    def within(self, factor: float = 10.0) -> bool:
        return all(r < factor * e for r, e in zip(self.residuals, self.moll_errors))


def is_A_free_witness(op: Operator, mu: MeasureSpec, etas=(1 / 32, 1 / 64),
                      points_per_eta: int = 8) -> WitnessReport:
    """Advisory check that ``A mu = 0``: L1 residual of A applied to mollified ``mu``."""
    if op.N != mu.N or op.d != mu.d:
        raise ValueError("operator and measure dimensions differ")
    lengths = [hi - lo for lo, hi in mu.omega]
    tv = mu.total_variation()
    res, errs = [], []
    for eta in etas:
        if not 0 < eta < min(lengths):
            raise ValueError("mollification width must be positive and smaller than the domain")
        u, spacing = mollify(mu, eta, points_per_eta)
        Au = spectral_apply(op, u, lengths)
        res.append(float(np.sum(np.linalg.norm(Au, axis=0)) * np.prod(spacing)))
        errs.append(eta * tv)
    decreasing = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(res, res[1:]))
    return WitnessReport(list(etas), res, errs, decreasing)
