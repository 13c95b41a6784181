"""Integrands ``f(x, z) = a(x) * kernel(z)`` with Q-periodic scalar coefficients.

Kernels built on ``|.|`` expose a Huber-smoothed value and gradient,

    h_delta(r) = r**2 / (2 delta)  if r <= delta  else  r - delta / 2,

so that ``h_delta <= |.| <= h_delta + delta / 2``. ``delta = 0`` gives the
raw value and a subgradient selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


def _huber(r, delta):
    if delta <= 0:
        return r
    return np.where(r <= delta, r * r / (2 * delta), r - delta / 2)


def _huber_dir(z, r, delta):
    """Gradient of ``h_delta(|z|)`` with respect to ``z`` (z has components on axis 0)."""
    den = np.maximum(r, delta) if delta > 0 else np.where(r > 0, r, 1.0)
    return z / den


@dataclass(frozen=True)
class Coefficient:
    """Q-periodic scalar field ``a(x)``.

    kinds: ``constant`` (``value``), ``laminate`` (phase ``low`` for the first
    ``fraction`` of each unit period along ``axis``, ``high`` after),
    ``checkerboard`` (sub-cells of side 1/2 alternating ``low``/``high``).
    ``shift`` evaluates at ``x + shift``.
    """

    kind: str = "constant"
    value: float = 1.0
    low: float = 1.0
    high: float = 1.0
    axis: int = 0
    fraction: float = 0.5
    shift: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "laminate", "checkerboard"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        lo, hi = self.bounds
        if lo <= 0:
            raise ValueError("coefficients must be positive")
        if self.kind == "laminate" and not 0 < self.fraction < 1:
            raise ValueError("laminate fraction must lie in (0, 1)")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return float(self.value), float(self.value)
        return float(min(self.low, self.high)), float(max(self.low, self.high))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.shift:
            x = x + np.asarray(self.shift, dtype=float).reshape((-1,) + (1,) * (x.ndim - 1))
        if self.kind == "constant":
            return np.full(x.shape[1:], float(self.value))
        # position inside the unit period, in [0, 1); tiny offset keeps grid-aligned interfaces unambiguous
        u = np.mod(x + 0.5, 1.0)
        if self.kind == "laminate":
            return np.where(u[self.axis] < self.fraction - 1e-12, self.low, self.high)
        parity = np.sum(np.floor(2 * u + 1e-12).astype(int), axis=0) % 2
        return np.where(parity == 0, self.low, self.high)

    def shifted(self, gamma) -> "Coefficient":
        gamma = np.asarray(gamma, dtype=float)
        base = np.asarray(self.shift, dtype=float) if self.shift else np.zeros_like(gamma)
        return replace(self, shift=tuple((base + gamma).tolist()))


class Kernel:
    """x-independent part of an integrand."""

    convex = True
    homogeneous = False  # positively 1-homogeneous
    needs_smoothing = True
    linear_growth = True

    def value(self, z, delta=0.0):
        raise NotImplementedError

    def grad(self, z, delta=0.0):
        raise NotImplementedError

    # constants for a == 1
    lipschitz = 1.0
    growth = (1.0, 1.0)

    def params(self) -> dict:
        return {}


class NormKernel(Kernel):
    homogeneous = True
    name = "norm"

    def value(self, z, delta=0.0):
        return _huber(np.linalg.norm(z, axis=0), delta)

    def grad(self, z, delta=0.0):
        return _huber_dir(z, np.linalg.norm(z, axis=0), delta)


class SmoothKernel(Kernel):
    """``sqrt(eps**2 + |z|**2)``."""

    needs_smoothing = False
    name = "smooth"

    def __init__(self, eps: float = 1.0):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)
        self.growth = (1.0, max(1.0, self.eps))

    def value(self, z, delta=0.0):
        return np.sqrt(self.eps**2 + np.sum(z * z, axis=0))

    def grad(self, z, delta=0.0):
        return z / self.value(z)

    def params(self):
        return {"eps": self.eps}


class AnisotropicKernel(Kernel):
    """``|M z|`` for an invertible matrix M."""

    homogeneous = True
    name = "anisotropic"

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if s[-1] <= 1e-12 * s[0] or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("anisotropy matrix must be square and invertible")
        self.lipschitz = float(s[0])
        self.growth = (float(s[-1]), float(s[0]))

    def value(self, z, delta=0.0):
        Mz = np.tensordot(self.matrix, z, axes=1)
        return _huber(np.linalg.norm(Mz, axis=0), delta)

    def grad(self, z, delta=0.0):
        Mz = np.tensordot(self.matrix, z, axes=1)
        return np.tensordot(self.matrix.T, _huber_dir(Mz, np.linalg.norm(Mz, axis=0), delta), axes=1)

    def params(self):
        return {"matrix": self.matrix.tolist()}


class NonconvexKernel(Kernel):
    """``min(|z - p|, |z + p|) + |z|``: Lipschitz, linear growth, not convex."""

    convex = False
    name = "nonconvex"

    def __init__(self, p):
        self.p = np.asarray(p, dtype=float)
        self.lipschitz = 2.0
        self.growth = (1.0, max(2.0, float(np.linalg.norm(self.p))))

    def _parts(self, z):
        p = self.p.reshape((-1,) + (1,) * (z.ndim - 1))
        return z - p, z + p

    def value(self, z, delta=0.0):
        zm, zp = self._parts(z)
        rm = _huber(np.linalg.norm(zm, axis=0), delta)
        rp = _huber(np.linalg.norm(zp, axis=0), delta)
        return np.minimum(rm, rp) + _huber(np.linalg.norm(z, axis=0), delta)

    def grad(self, z, delta=0.0):
        zm, zp = self._parts(z)
        nm, np_ = np.linalg.norm(zm, axis=0), np.linalg.norm(zp, axis=0)
        pick = _huber(nm, delta) <= _huber(np_, delta)
        g = np.where(pick, _huber_dir(zm, nm, delta), _huber_dir(zp, np_, delta))
        return g + _huber_dir(z, np.linalg.norm(z, axis=0), delta)

    def params(self):
        return {"p": self.p.tolist()}


class QuadraticKernel(Kernel):
    """``|z|**2``; quadratic growth, kept only as a solver check."""

    needs_smoothing = False
    linear_growth = False
    lipschitz = float("inf")
    growth = (float("nan"), float("nan"))
    name = "quadratic"

    def value(self, z, delta=0.0):
        return np.sum(z * z, axis=0)

    def grad(self, z, delta=0.0):
        return 2 * z


@dataclass(frozen=True)
class Integrand:
    kernel: Kernel
    coefficient: Coefficient = field(default_factory=Coefficient)

    @property
    def convex_in_zeta(self) -> bool:
        return self.kernel.convex

    @property
    def homogeneous(self) -> bool:
        return self.kernel.homogeneous

    @property
    def lipschitz_L(self) -> float:
        return self.coefficient.bounds[1] * self.kernel.lipschitz

    @property
    def growth(self) -> tuple[float, float]:
        lo, hi = self.coefficient.bounds
        c1, c2 = self.kernel.growth
        return lo * c1, hi * c2

    @property
    def x_independent(self) -> bool:
        return self.coefficient.kind == "constant"

    def eval(self, x, z) -> np.ndarray:
        """``f(x, z)``; ``x`` has shape ``(N, ...)``, ``z`` shape ``(d, ...)``."""
        return self.coefficient(x) * self.kernel.value(np.asarray(z, dtype=float))

    def subgrad(self, x, z) -> np.ndarray:
        return self.coefficient(x) * self.kernel.grad(np.asarray(z, dtype=float))

    def __call__(self, z) -> np.ndarray:
        """Evaluate an x-independent integrand at ``z`` of shape ``(d, ...)``."""
        if not self.x_independent:
            raise ValueError("integrand depends on x; use eval(x, z)")
        return self.coefficient.value * self.kernel.value(np.asarray(z, dtype=float))

    def shifted(self, gamma) -> "Integrand":
        return replace(self, coefficient=self.coefficient.shifted(gamma))

    def to_dict(self) -> dict:
        c = self.coefficient
        coef = {"kind": c.kind}
        if c.kind == "constant":
            coef["value"] = c.value
        else:
            coef.update(low=c.low, high=c.high)
            if c.kind == "laminate":
                coef.update(axis=c.axis, fraction=c.fraction)
        return {"family": self.kernel.name, "coefficient": coef, **self.kernel.params()}


def make_integrand(family: str, coefficient: Coefficient | dict | None = None, **params) -> Integrand:
    """Build a stock integrand.

    families: ``norm`` (a|z|), ``smooth`` (a sqrt(eps^2 + |z|^2)),
    ``anisotropic`` (a|Mz|, needs ``matrix``), ``nonconvex``
    (``min(|z-p|,|z+p|) + |z|``, needs ``p``), ``quadratic`` (a|z|^2).
    """
    if coefficient is None:
        coefficient = Coefficient()
    elif isinstance(coefficient, dict):
        coefficient = Coefficient(**coefficient)
    if family == "norm":
        kernel = NormKernel()
    elif family in ("smooth", "smooth-linear"):
        kernel = SmoothKernel(params.pop("eps", params.pop("delta", 1.0)))
    elif family == "anisotropic":
        kernel = AnisotropicKernel(params.pop("matrix"))
    elif family == "nonconvex":
        kernel = NonconvexKernel(params.pop("p"))
    elif family == "quadratic":
        kernel = QuadraticKernel()
    else:
        raise ValueError(f"unknown integrand family {family!r}")
    if params:
        raise ValueError(f"unused integrand parameters: {sorted(params)}")
    return Integrand(kernel, coefficient)
