"""Constitutive building blocks: the latent-heat function alpha, the coupling G,
the convex part F1 of the phase potential and its concave complement F2.

Every object is a small immutable evaluator with vectorised ``value``/``d1``/``d2``
methods plus the bound certificates the scheme needs (sup G, sup|G'|, the
Lipschitz constant of G', sup|pi'|, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "ExpAlpha",
    "TabulatedAlpha",
    "RationalG",
    "ZeroG",
    "TabulatedG",
    "IndicatorF1",
    "ZeroF1",
    "ConvexF1",
    "QuadraticF2",
    "ResolventError",
]


class ResolventError(RuntimeError):
    """The Newton resolvent of a user-supplied convex F1 failed to converge."""


# ---------------------------------------------------------------------------
# alpha: C^2 on [0, inf) with alpha(0) = 0


@dataclass(frozen=True)
class ExpAlpha:
    """alpha(r) = A (1 - exp(-r)) for r >= 0."""

    A: float = 0.5
    name: str = "exp"

    def value(self, r):
        return self.A * -np.expm1(-np.asarray(r, dtype=float))

    def d1(self, r):
        return self.A * np.exp(-np.asarray(r, dtype=float))

    def d2(self, r):
        return -self.A * np.exp(-np.asarray(r, dtype=float))

    @property
    def a1(self) -> float:
        return float(self.A)

    @property
    def a2(self) -> float:
        return float(-self.A)

    @property
    def curvature_bound(self) -> float:
        """sup over r >= 0 of (r + 1)|alpha''(r)|; attained at r = 0."""
        return abs(float(self.A))

    def to_dict(self) -> dict:
        return {"kind": "exp", "A": self.A}


@dataclass(frozen=True)
class TabulatedAlpha:
    """Cubic spline through samples on uniform knots of [0, r_max].

    Beyond ``r_max`` the function is held at its last value (derivatives zero).
    The first sample must be 0.
    """

    r_max: float
    samples: tuple[float, ...]
    name: str = "tabulated"
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=float)
        if y.ndim != 1 or y.size < 4:
            raise ValueError("tabulated alpha needs at least 4 samples")
        if abs(y[0]) > 0.0:
            raise ValueError(f"tabulated alpha must vanish at 0, got {y[0]}")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        knots = np.linspace(0.0, float(self.r_max), y.size)
        object.__setattr__(self, "samples", tuple(float(v) for v in y))
        object.__setattr__(self, "_spline", CubicSpline(knots, y, bc_type="natural"))

    def _eval(self, r, nu):
        r = np.asarray(r, dtype=float)
        inside = self._spline(np.clip(r, 0.0, self.r_max), nu)
        if nu == 0:
            return inside
        return np.where(r > self.r_max, 0.0, inside)

    def value(self, r):
        return self._eval(r, 0)

    def d1(self, r):
        return self._eval(r, 1)

    def d2(self, r):
        return self._eval(r, 2)

    @property
    def a1(self) -> float:
        return float(self._spline(0.0, 1))

    @property
    def a2(self) -> float:
        return float(self._spline(0.0, 2))

    @property
    def curvature_bound(self) -> float:
        r = np.linspace(0.0, self.r_max, 20001)
        return float(np.max((r + 1.0) * np.abs(self.d2(r))))

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "r_max": self.r_max, "samples": list(self.samples)}


# ---------------------------------------------------------------------------
# G: C^1, G(0) = G'(0) = 0, bounded with Lipschitz derivative


@dataclass(frozen=True)
class RationalG:
    """G(s) = s^2 / (1 + s^2)."""

    name: str = "rational"

    def value(self, s):
        s2 = np.asarray(s, dtype=float) ** 2
        return s2 / (1.0 + s2)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return 2.0 * s / (1.0 + s * s) ** 2

    @property
    def sup(self) -> float:
        return 1.0

    @property
    def sup_d1(self) -> float:
        # maximum of 2s/(1+s^2)^2 is at s = 1/sqrt(3)
        return 9.0 / (8.0 * np.sqrt(3.0))

    @property
    def lip_d1(self) -> float:
        # |G''| = |2 - 6 s^2| / (1 + s^2)^3 peaks at s = 0
        return 2.0

    def to_dict(self) -> dict:
        return {"kind": "rational"}


@dataclass(frozen=True)
class ZeroG:
    """G = 0: thermal and mechanical parts decouple from the phase."""

    name: str = "zero"

    def value(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def d1(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    sup = 0.0
    sup_d1 = 0.0
    lip_d1 = 0.0

    def to_dict(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class TabulatedG:
    """Cubic spline through samples on uniform knots of [-s_max, s_max].

    Held constant outside the knot range.  Certificates come from dense
    sampling of the spline.
    """

    s_max: float
    samples: tuple[float, ...]
    name: str = "tabulated"
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=float)
        if y.ndim != 1 or y.size < 5 or y.size % 2 == 0:
            raise ValueError("tabulated G needs an odd number (>= 5) of samples centred at 0")
        knots = np.linspace(-float(self.s_max), float(self.s_max), y.size)
        sp = CubicSpline(knots, y, bc_type="clamped")
        if abs(sp(0.0)) > 1e-12 or abs(sp(0.0, 1)) > 1e-8:
            raise ValueError("tabulated G must satisfy G(0) = G'(0) = 0")
        object.__setattr__(self, "samples", tuple(float(v) for v in y))
        object.__setattr__(self, "_spline", sp)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self._spline(np.clip(s, -self.s_max, self.s_max))

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) > self.s_max, 0.0, self._spline(np.clip(s, -self.s_max, self.s_max), 1))

    def _dense(self):
        return np.linspace(-self.s_max, self.s_max, 20001)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.value(self._dense()))))

    @property
    def sup_d1(self) -> float:
        return float(np.max(np.abs(self.d1(self._dense()))))

    @property
    def lip_d1(self) -> float:
        return float(np.max(np.abs(self._spline(self._dense(), 2))))

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "s_max": self.s_max, "samples": list(self.samples)}


# ---------------------------------------------------------------------------
# F1: convex, lower semicontinuous; its Moreau envelope is built here


@dataclass(frozen=True)
class IndicatorF1:
    """Indicator of [-1, 1] (double obstacle)."""

    name: str = "indicator"

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) <= 1.0, 0.0, np.inf)

    def envelope(self, eps, s):
        """(F1eps, beta_eps, beta_eps') in closed form."""
        s = np.asarray(s, dtype=float)
        excess = s - np.clip(s, -1.0, 1.0)
        return excess**2 / (2.0 * eps), excess / eps, np.where(excess != 0.0, 1.0 / eps, 0.0)

    def to_dict(self) -> dict:
        return {"kind": "indicator"}


@dataclass(frozen=True)
class ZeroF1:
    """F1 = 0: no constraint on the phase variable."""

    name: str = "zero"

    def value(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def envelope(self, eps, s):
        z = np.zeros_like(np.asarray(s, dtype=float))
        return z, z.copy(), z.copy()

    def to_dict(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class ConvexF1:
    """User-supplied convex C^2 potential given by callables for F1, F1', F1''.

    The envelope is evaluated through the resolvent p = (I + eps F1')^{-1}(s),
    solved nodewise by Newton's method safeguarded with bisection.
    """

    f: object
    df: object
    d2f: object
    name: str = "convex"
    tol: float = 1e-14
    max_iter: int = 100

    def value(self, s):
        return np.asarray(self.f(np.asarray(s, dtype=float)), dtype=float)

    def resolvent(self, eps, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        # p lies between s and s - eps F1'(s) because F1' is monotone
        end = s - eps * np.asarray(self.df(s), dtype=float)
        lo, hi = np.minimum(s, end), np.maximum(s, end)
        p = 0.5 * (lo + hi)
        scale = 1.0 + np.abs(s)
        for _ in range(self.max_iter):
            g = p + eps * np.asarray(self.df(p), dtype=float) - s
            if np.all(np.abs(g) <= self.tol * scale):
                return p
            lo = np.where(g < 0, p, lo)
            hi = np.where(g > 0, p, hi)
            step = p - g / (1.0 + eps * np.asarray(self.d2f(p), dtype=float))
            bad = ~((step > lo) & (step < hi))
            p = np.where(bad, 0.5 * (lo + hi), step)
        g = p + eps * np.asarray(self.df(p), dtype=float) - s
        raise ResolventError(f"resolvent did not converge, max residual {float(np.max(np.abs(g))):.3e}")

    def envelope(self, eps, s):
        shape = np.shape(s)
        s1 = np.atleast_1d(np.asarray(s, dtype=float))
        p = self.resolvent(eps, s1)
        F = (s1 - p) ** 2 / (2.0 * eps) + np.asarray(self.f(p), dtype=float)
        beta = (s1 - p) / eps
        c = np.asarray(self.d2f(p), dtype=float)
        dbeta = c / (1.0 + eps * c)
        return F.reshape(shape), beta.reshape(shape), dbeta.reshape(shape)

    def to_dict(self) -> dict:
        return {"kind": "convex"}


# ---------------------------------------------------------------------------
# F2: C^2 with Lipschitz derivative pi


@dataclass(frozen=True)
class QuadraticF2:
    """F2(s) = -k s^2 / 2, so pi(s) = -k s and sup|pi'| = |k|."""

    k: float = 1.0

    def value(self, s):
        return -0.5 * self.k * np.asarray(s, dtype=float) ** 2

    def pi(self, s):
        return -self.k * np.asarray(s, dtype=float)

    def dpi(self, s):
        return np.full_like(np.asarray(s, dtype=float), -self.k)

    @property
    def sup_dpi(self) -> float:
        return abs(float(self.k))

    def to_dict(self) -> dict:
        return {"kind": "quadratic", "k": self.k}
