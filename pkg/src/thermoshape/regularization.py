"""The epsilon-indexed regularisation of the constitutive data.

``ModelFunctions`` bundles the unregularised data and checks the structural
assumptions by sampling.  ``EpsFamily`` builds, for one eps, every smoothed
object the scheme evaluates:

* the Dirac-approximating kernel D_eps with normaliser lambda_eps and the
  zero-mean bump zeta_eps, each with closed-form first and second antiderivatives;
* alpha_eps (orders 0 to 2), which matches alpha' exactly for r >= 2 sqrt(eps) and
  vanishes with its first two derivatives at 0 (and identically for r < 0);
* the Moreau envelope F1eps and its derivative beta_eps;
* G_eps, a shifted-and-mollified G that vanishes near 0, and gamma_eps = G_eps sign;
* phi_eps (the change of variable theta -> w) and its r-derivative a_eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import ExpAlpha, IndicatorF1, QuadraticF2, RationalG

__all__ = [
    "ModelFunctions",
    "EpsFamily",
    "BandViolation",
    "lambda_eps",
    "d_eps",
    "zeta_eps",
    "zeta_profile",
    "alpha_eps",
    "yosida",
    "g_eps",
    "gamma_eps",
    "phi_eps",
    "w_of",
    "parabolic_coeff",
]


class BandViolation(ValueError):
    """A parabolicity-band certificate failed."""


# ---------------------------------------------------------------------------
# unregularised data


@dataclass(frozen=True)
class ModelFunctions:
    """Constitutive data of the unregularised problem.

    ``lambda0`` is the declared parabolicity constant, in (0, c0).  The
    structural assumptions are sampled by :meth:`certify`.
    """

    c0: float = 1.0
    kappa: float = 1.0
    theta_c: float = 1.0
    e: tuple[float, ...] = (1.0,)
    alpha: object = field(default_factory=ExpAlpha)
    G: object = field(default_factory=RationalG)
    F1: object = field(default_factory=IndicatorF1)
    F2: object = field(default_factory=QuadraticF2)
    lambda0: float = 0.9

    def __post_init__(self):
        for name in ("c0", "kappa", "theta_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        e = tuple(float(x) for x in self.e)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError(f"e must be a unit vector, got {e}")
        object.__setattr__(self, "e", e)
        if not 0.0 < self.lambda0 < self.c0:
            raise ValueError(f"lambda0 must lie in (0, c0), got {self.lambda0}")

    @property
    def dim(self) -> int:
        return len(self.e)

    @property
    def a1(self) -> float:
        return self.alpha.a1

    @property
    def a2(self) -> float:
        return self.alpha.a2

    @property
    def sup_dpi(self) -> float:
        return self.F2.sup_dpi

    @property
    def tau_star(self) -> float:
        """Step-size threshold below which each phase step is strictly convex."""
        k = self.theta_c * self.sup_dpi
        return np.inf if k == 0 else 1.0 / k

    def gamma(self, s):
        s = np.asarray(s, dtype=float)
        return self.G.value(s) * np.sign(s)

    def certify(self, r_max: float = 50.0, s_max: float = 5.0, samples: int = 401) -> dict:
        """Sample the parabolicity and boundedness assumptions.

        Returns a dict with the sampled minimum of ``c0 - r alpha''(r) G(s)``
        and the sampled sup over ``r >= 1`` of ``|alpha| + |r alpha'| + r |alpha''|``.
        Raises :class:`BandViolation` if parabolicity fails.
        """
        r = np.linspace(0.0, r_max, samples)
        s = np.linspace(-s_max, s_max, samples)
        R, S = np.meshgrid(r, s, indexing="ij")
        parab = self.c0 - R * self.alpha.d2(R) * self.G.value(S)
        pmin = float(np.min(parab))
        if pmin < self.lambda0:
            raise BandViolation(f"parabolicity fails: sampled min {pmin:.6g} < lambda0 {self.lambda0}")
        r1 = r[r >= 1.0]
        bound = float(np.max(np.abs(self.alpha.value(r1)) + np.abs(r1 * self.alpha.d1(r1)) + r1 * np.abs(self.alpha.d2(r1))))
        return {"parabolicity_min": pmin, "growth_bound": bound, "lip_dG": float(self.G.lip_d1)}

    def to_dict(self) -> dict:
        return {
            "c0": self.c0,
            "kappa": self.kappa,
            "theta_c": self.theta_c,
            "e": list(self.e),
            "alpha": self.alpha.to_dict(),
            "G": self.G.to_dict(),
            "F1": self.F1.to_dict(),
            "F2": self.F2.to_dict(),
            "lambda0": self.lambda0,
        }


# ---------------------------------------------------------------------------
# kernels


def lambda_eps(eps: float) -> float:
    """Normaliser making the kernel D_eps a probability density on [0, inf)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    se = np.sqrt(eps)
    bracket = 0.25 + np.log1p(1.0 / se) - np.log(2.0) + 0.5 / (1.0 + se)
    return float(1.0 / bracket)


def _d_pieces(eps: float, lam: float, r: np.ndarray, antiderivative: int) -> np.ndarray:
    """Kernel D_eps (or its first/second antiderivative from 0) for r >= 0."""
    s = np.sqrt(eps)
    k = lam / (eps + eps * s)
    r = np.asarray(r, dtype=float)

    def p1(x, m):
        return (lam * x / (2 * eps**2), lam * x**2 / (4 * eps**2), lam * x**3 / (12 * eps**2))[m]

    def p2(x, m):
        L = np.log((x + eps) / (2 * eps))
        if m == 0:
            return lam / (x + eps)
        if m == 1:
            return lam / 4 + lam * L
        return p1(eps, 2) + lam * (x - eps) / 4 + lam * ((x + eps) * L - (x + eps) + 2 * eps)

    def p3(x, m):
        y = x - s
        if m == 0:
            return k * (s - y)
        if m == 1:
            return p2(s, 1) + k * (s * y - y**2 / 2)
        return p2(s, 2) + p2(s, 1) * y + k * (s * y**2 / 2 - y**3 / 6)

    def p4(x, m):
        if m == 0:
            return np.zeros_like(x)
        if m == 1:
            return np.ones_like(x)
        return p3(2 * s, 2) + (x - 2 * s)

    out = np.empty_like(r)
    m1 = r <= eps
    m2 = (r > eps) & (r < s)
    m3 = (r >= s) & (r < 2 * s)
    m4 = r >= 2 * s
    out[m1] = p1(r[m1], antiderivative)
    out[m2] = p2(r[m2], antiderivative)
    out[m3] = p3(r[m3], antiderivative)
    out[m4] = p4(r[m4], antiderivative)
    return out


def d_eps(eps: float, r, antiderivative: int = 0):
    """Kernel D_eps at r >= 0; ``antiderivative`` 1 or 2 gives its running integrals from 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("D_eps is defined for r >= 0 only")
    if antiderivative not in (0, 1, 2):
        raise ValueError("antiderivative must be 0, 1 or 2")
    return _d_pieces(eps, lambda_eps(eps), r, antiderivative)[()]


def zeta_profile(x, antiderivative: int = 0):
    """Base bump (1 - 4x)(1 - x)^2 on [0, 1], 0 beyond, and its running integrals."""
    x = np.asarray(x, dtype=float)
    if antiderivative == 0:
        inside = (1 - 4 * x) * (1 - x) ** 2
        beyond = 0.0
    elif antiderivative == 1:
        inside = x - 3 * x**2 + 3 * x**3 - x**4
        beyond = 0.0
    elif antiderivative == 2:
        inside = x**2 / 2 - x**3 + 0.75 * x**4 - x**5 / 5
        beyond = 1.0 / 20.0
    else:
        raise ValueError("antiderivative must be 0, 1 or 2")
    return np.where(x < 1.0, inside, beyond)[()]


def zeta_eps(eps: float, r, antiderivative: int = 0):
    """zeta(r/eps) and its running integrals from 0 (for r >= 0)."""
    r = np.asarray(r, dtype=float)
    return (eps**antiderivative * zeta_profile(r / eps, antiderivative))[()]


# ---------------------------------------------------------------------------
# mollifier for G

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_KERNEL_W = 15.0 / 16.0 * (1.0 - _GL_NODES**2) ** 2 * _GL_WEIGHTS
_KERNEL_W = _KERNEL_W / _KERNEL_W.sum()
# half-width of the mollifier relative to eps; anything below 1 keeps the
# support inside (-eps, eps) and leaves G_eps identically 0 on (-(1 - c) eps, (1 - c) eps)
_MOLLIFIER_HALF_WIDTH = 0.5


# ---------------------------------------------------------------------------
# the eps-bundle


class EpsFamily:
    """All eps-regularised constitutive functions for one eps.

    Attributes:
        eps, lam: eps and lambda_eps.
        lambda_star: lower parabolicity bound lambda0 / 2.
        C_star: upper bound of a_eps and of phi_eps(r, s) / r.
    """

    def __init__(self, model: ModelFunctions, eps: float):
        if not 0.0 < eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {eps}")
        self.model = model
        self.eps = float(eps)
        self.lam = lambda_eps(eps)
        self.lambda_star = 0.5 * model.lambda0
        a1, a2 = model.a1, model.a2
        self.C_star = model.c0 + model.G.sup * (
            model.alpha.curvature_bound + 2 * abs(a1) * self.lam + 2 * self.eps * abs(a2)
        )

    # kernels ---------------------------------------------------------------
    def D(self, r, antiderivative: int = 0):
        r = np.asarray(r, dtype=float)
        return _d_pieces(self.eps, self.lam, np.maximum(r, 0.0), antiderivative)

    def zeta(self, r, antiderivative: int = 0):
        return zeta_eps(self.eps, np.maximum(np.asarray(r, dtype=float), 0.0), antiderivative)

    # alpha_eps ---------------------------------------------------------------
    def alpha(self, r, order: int = 0):
        """alpha_eps and its first two derivatives, extended by 0 to r < 0."""
        r = np.asarray(r, dtype=float)
        rp = np.maximum(r, 0.0)
        al, a1, a2 = self.model.alpha, self.model.a1, self.model.a2
        if order == 0:
            v = al.value(rp) - a1 * rp + a1 * self.D(rp, 2) - a2 * self.zeta(rp, 2)
        elif order == 1:
            # written as a1 (D1 - 1) so the identity with alpha' is exact past 2 sqrt(eps)
            v = al.d1(rp) + a1 * (self.D(rp, 1) - 1.0) - a2 * self.zeta(rp, 1)
        elif order == 2:
            v = al.d2(rp) + a1 * self.D(rp, 0) - a2 * self.zeta(rp, 0)
        else:
            raise ValueError("order must be 0, 1 or 2")
        return np.where(r > 0.0, v, 0.0)

    # Moreau envelope of F1 ---------------------------------------------------
    def yosida(self, s):
        """(F1eps(s), beta_eps(s))."""
        F, b, _ = self.model.F1.envelope(self.eps, s)
        return F, b

    def F1eps(self, s):
        return self.model.F1.envelope(self.eps, s)[0]

    def beta(self, s):
        return self.model.F1.envelope(self.eps, s)[1]

    def dbeta(self, s):
        """Generalised derivative of beta_eps (a Newton slope for the semismooth case)."""
        return self.model.F1.envelope(self.eps, s)[2]

    def F(self, s):
        return self.F1eps(s) + self.model.F2.value(s)

    def dF(self, s):
        return self.beta(s) + self.model.F2.pi(s)

    # G_eps, gamma_eps ----------------------------------------------------------
    def _shifted(self, r, deriv: bool):
        G = self.model.G
        f = G.d1 if deriv else G.value
        e = self.eps
        return np.where(r >= e, f(r - e), np.where(r <= -e, f(r + e), 0.0))

    def G(self, s, order: int = 0):
        """Shifted, mollified G (order 0) or its exact derivative (order 1)."""
        if order not in (0, 1):
            raise ValueError("order must be 0 or 1")
        s = np.asarray(s, dtype=float)
        h = _MOLLIFIER_HALF_WIDTH * self.eps
        out = np.zeros_like(s)
        for y, w in zip(_GL_NODES, _KERNEL_W):
            out = out + w * self._shifted(s - h * y, order == 1)
        return out

    def gamma(self, s, order: int = 0):
        s = np.asarray(s, dtype=float)
        return self.G(s, order) * np.sign(s)

    @property
    def lip_gamma(self) -> float:
        """Lipschitz bound shared by G_eps and gamma_eps."""
        return float(self.model.G.sup_d1)

    # change of variables -------------------------------------------------------
    def phi(self, r, s):
        r = np.asarray(r, dtype=float)
        c0 = self.model.c0
        return c0 * r + (self.alpha(r, 0) - (r + self.eps) * self.alpha(r, 1)) * self.G(s)

    def a(self, r, s):
        """d phi / dr = c0 - (r + eps) alpha_eps''(r) G_eps(s)."""
        r = np.asarray(r, dtype=float)
        return self.model.c0 - (r + self.eps) * self.alpha(r, 2) * self.G(s)

    def check_band(self, a, what: str = "a_eps", slack: float = 1e-12):
        a = np.asarray(a, dtype=float)
        lo, hi = float(np.min(a)), float(np.max(a))
        if lo < self.lambda_star - slack or hi > self.C_star + slack:
            raise BandViolation(
                f"{what} outside [{self.lambda_star:.6g}, {self.C_star:.6g}]: range [{lo:.6g}, {hi:.6g}]"
            )
        return lo, hi

    def check_phi_band(self, theta, w, slack: float = 1e-12):
        """lambda_star theta <= w <= C_star theta where theta >= 0."""
        theta = np.asarray(theta, dtype=float)
        w = np.asarray(w, dtype=float)
        pos = theta >= 0
        scale = slack * (1.0 + np.abs(theta))
        bad = pos & ((w < self.lambda_star * theta - scale) | (w > self.C_star * theta + scale))
        if np.any(bad):
            i = np.flatnonzero(bad.ravel())[0]
            raise BandViolation(
                f"w outside [lambda_star theta, C_star theta] at node {i}: theta={theta.ravel()[i]:.6g}, w={w.ravel()[i]:.6g}"
            )

    def to_dict(self) -> dict:
        return {"eps": self.eps, "lambda_eps": self.lam, "lambda_star": self.lambda_star, "C_star": self.C_star}


# ---------------------------------------------------------------------------
# functional front end with default data


_DEFAULT = ModelFunctions()


def _fam(eps, model):
    return EpsFamily(model or _DEFAULT, eps)


def alpha_eps(eps: float, r, order: int = 0, model: ModelFunctions | None = None):
    return _fam(eps, model).alpha(r, order)[()]


def yosida(eps: float, s, model: ModelFunctions | None = None):
    if not eps > 0:
        raise ValueError("eps must be positive")
    F, b, _ = (model or _DEFAULT).F1.envelope(eps, s)
    return np.asarray(F)[()], np.asarray(b)[()]


def g_eps(eps: float, s, order: int = 0, model: ModelFunctions | None = None):
    return _fam(eps, model).G(s, order)[()]


def gamma_eps(eps: float, s, order: int = 0, model: ModelFunctions | None = None):
    return _fam(eps, model).gamma(s, order)[()]


def phi_eps(eps: float, r, s, model: ModelFunctions | None = None):
    return _fam(eps, model).phi(r, s)[()]


def parabolic_coeff(eps: float, r, s, model: ModelFunctions | None = None, check: bool = False):
    fam = _fam(eps, model)
    a = fam.a(r, s)
    if check:
        fam.check_band(a)
    return a[()]


def w_of(fam: EpsFamily, theta, chi, check: bool = False):
    """Nodewise w = phi_eps(theta, chi); optionally asserts the band."""
    w = fam.phi(theta, chi)
    if check:
        fam.check_phi_band(theta, w)
    return w
