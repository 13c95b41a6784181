"""First-order constant-coefficient operators ``A = sum_i A^(i) d/dx_i``.

Holds the symbol, the constant-rank check, the characteristic cone and the
three stock operators (div, curl, Maxwell).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import norm, qmc

DEFAULT_TOL = 1e-10


class ConstantRankError(ValueError):
    """The symbol does not have constant rank on the sampled frequencies."""


@dataclass(frozen=True, eq=False)
class Operator:
    """Coefficient matrices stacked as an array of shape ``(N, M, d)``."""

    coefficients: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        A = np.array(self.coefficients, dtype=float)
        if A.ndim != 3:
            raise ValueError("coefficients must have shape (N, M, d)")
        if A.shape[0] < 2:
            raise ValueError(f"spatial dimension N must be >= 2, got {A.shape[0]}")
        A.setflags(write=False)
        object.__setattr__(self, "coefficients", A)

    @property
    def N(self) -> int:
        return self.coefficients.shape[0]

    @property
    def M(self) -> int:
        return self.coefficients.shape[1]

    @property
    def d(self) -> int:
        return self.coefficients.shape[2]

    def key(self):
        return (self.coefficients.shape, self.coefficients.tobytes())

    def __eq__(self, other):
        return isinstance(other, Operator) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "d": self.d,
            "A": [mat.tolist() for mat in self.coefficients],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Operator":
        A = np.asarray(doc["A"], dtype=float)
        N, M, d = int(doc["N"]), int(doc["M"]), int(doc["d"])
        if A.shape != (N, M, d):
            raise ValueError(f"operator matrices have shape {A.shape}, expected {(N, M, d)}")
        return cls(A, name=doc.get("name", "custom"))

    @classmethod
    def from_json(cls, text: str) -> "Operator":
        return cls.from_dict(json.loads(text))


def symbol(op: Operator, xi) -> np.ndarray:
    """Return ``sum_i A^(i) xi_i``.

    ``xi`` may carry leading batch axes: shape ``(..., N)`` gives ``(..., M, d)``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != op.N:
        raise ValueError(f"frequency has {xi.shape[-1]} components, operator has N={op.N}")
    return np.tensordot(xi, op.coefficients, axes=([-1], [0]))


def _numerical_ranks(mats: np.ndarray, tol: float) -> np.ndarray:
    s = np.linalg.svd(mats, compute_uv=False)
    smax = s[..., :1]
    return np.sum(s > tol * smax, axis=-1) * (smax[..., 0] > 0)


def sphere_points(N: int, n: int, seed: int | None = None) -> np.ndarray:
    """Quasi-uniform points on S^{N-1} followed by the 2N coordinate axes.

    Deterministic unless ``seed`` is given, in which case points are Gaussian
    draws normalized to the sphere.
    """
    if seed is not None:
        pts = np.random.default_rng(seed).standard_normal((n, N))
    elif N == 2:
        theta = 2 * np.pi * (np.arange(n) + 0.5) / n
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    elif N == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        r = np.sqrt(1 - z**2)
        phi = np.pi * (1 + 5**0.5) * i
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        u = qmc.Halton(d=N, scramble=False).random(n + 1)[1:]
        pts = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    eye = np.eye(N)
    return np.concatenate([pts, eye, -eye])


def check_constant_rank(op: Operator, n_samples: int = 200, tol: float = DEFAULT_TOL,
                        seed: int | None = None) -> tuple[int, bool]:
    """Numerical rank of the symbol over the unit sphere.

    Returns ``(c, True)`` when every sample has rank c, else
    ``(max observed rank, False)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n_samples < 2 * op.N:
        raise ValueError(f"n_samples must be >= 2N = {2 * op.N}")
    ranks = _numerical_ranks(symbol(op, sphere_points(op.N, n_samples, seed)), tol)
    satisfied = bool(np.all(ranks == ranks[0]))
    return int(ranks.max()), satisfied


def nullspace(mat: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``mat``."""
    _, s, vh = np.linalg.svd(mat)
    if s.size == 0 or s[0] == 0:
        return np.eye(mat.shape[1])
    rank = int(np.sum(s > tol * s[0]))
    return vh[rank:].T


@dataclass(frozen=True)
class ConeReport:
    cone_samples: np.ndarray  # (n, d) unit vectors
    witness_directions: np.ndarray  # (n, N) unit vectors
    span_dim: int
    h2_satisfied: bool
    rank: int
    tol: float = DEFAULT_TOL
    residuals: np.ndarray = field(default=None, repr=False)


def characteristic_cone(op: Operator, n_dir_samples: int = 500, tol: float = DEFAULT_TOL,
                        seed: int | None = None) -> ConeReport:
    c, ok = check_constant_rank(op, max(n_dir_samples, 2 * op.N), tol, seed)
    if not ok:
        raise ConstantRankError(f"symbol rank is not constant on the sphere (max rank {c})")
    vs, ws = [], []
    for w in sphere_points(op.N, n_dir_samples, seed):
        ker = nullspace(symbol(op, w), tol)
        for v in ker.T:
            vs.append(v)
            ws.append(w)
    d = op.d
    vs = np.array(vs).reshape(-1, d)
    ws = np.array(ws).reshape(-1, op.N)
    res = np.linalg.norm(np.einsum("kmd,kd->km", symbol(op, ws), vs), axis=1) if len(vs) else np.zeros(0)
    span = int(np.linalg.matrix_rank(vs.T, tol=1e-8)) if len(vs) else 0
    return ConeReport(vs, ws, span, span == d, c, tol, res)


def cone_witnesses(op: Operator, v, tol: float = 1e-8) -> np.ndarray:
    """Basis (columns) of ``{w in R^N : (sum_i A^(i) w_i) v = 0}``.

    Empty (shape ``(N, 0)``) exactly when ``v`` is not in the cone.
    """
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.eye(op.N)
    # column i is A^(i) v
    B = np.einsum("imd,d->mi", op.coefficients, v / nv)
    _, s, vh = np.linalg.svd(B)
    scale = max(np.abs(op.coefficients).max(), 1.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].T


def in_cone(op: Operator, v, tol: float = 1e-8) -> bool:
    return cone_witnesses(op, v, tol).shape[1] > 0


def div_operator(N: int) -> Operator:
    if N < 2:
        raise ValueError("div needs N >= 2")
    A = np.zeros((N, 1, N))
    for i in range(N):
        A[i, 0, i] = 1.0
    return Operator(A, name=f"div{N}")


def curl_operator(m: int, N: int) -> Operator:
    """Rows ``d_i mu^j_k - d_k mu^j_i`` ordered by (j, i<k); component (j, i) sits at j*N + i."""
    if m < 1 or N < 2:
        raise ValueError("curl needs m >= 1 and N >= 2")
    pairs = list(combinations(range(N), 2))
    M = m * len(pairs)
    A = np.zeros((N, M, m * N))
    row = 0
    for j in range(m):
        for i, k in pairs:
            A[i, row, j * N + k] += 1.0
            A[k, row, j * N + i] -= 1.0
            row += 1
    return Operator(A, name=f"curl{m}_{N}")


def maxwell_operator() -> Operator:
    """``(m, h) -> (div(m + h), curl h)`` in N = 3 with d = 6, M = 4."""
    A = np.zeros((3, 4, 6))
    for i in range(3):
        A[i, 0, i] = 1.0
        A[i, 0, 3 + i] = 1.0
    curl = curl_operator(1, 3).coefficients
    A[:, 1:, 3:] = curl
    return Operator(A, name="maxwell")


def builtin(name: str, N: int | None = None, m: int = 1) -> Operator:
    """Stock operators addressed by name: ``div``, ``curl``, ``maxwell``.

    Also accepts compact strings such as ``"div3"`` or ``"curl(2,3)"``.
    """
    key = name.strip().lower().replace(" ", "")
    if key.startswith("curl(") and key.endswith(")"):
        m_s, n_s = key[5:-1].split(",")
        return curl_operator(int(m_s), int(n_s))
    if key.startswith("div") and key[3:].isdigit():
        return div_operator(int(key[3:]))
    if key == "div":
        return div_operator(2 if N is None else N)
    if key == "curl":
        return curl_operator(m, 2 if N is None else N)
    if key == "maxwell":
        if N not in (None, 3):
            raise ValueError("maxwell is defined for N = 3 only")
        return maxwell_operator()
    raise ValueError(f"unknown operator {name!r}")
