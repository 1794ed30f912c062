"""Time interpolants of a level vector z_0..z_N and their exact slab norms.

Levels may be scalars or arrays (any trailing shape).  A ghost level
``z_{N+1} = 2 z_N - z_{N-1}`` is appended, which makes
``dz_N = dz_{N-1}`` and ``d2z_{N-1} = 0``.  On the slab ``I_n = ((n-1) tau, n tau]``:

* forth-constant ``bar``: z_n
* back-constant ``under``: z_{n-1}
* piecewise-linear ``hat``: z_{n-1} + s dz_{n-1}, s = t - (n-1) tau
* piecewise-quadratic ``tilde``: C^1, second derivative d2z_{n-1}, starting
  from z_0 with slope dz_0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KINDS",
    "Interpolant",
    "extend_ghost",
    "diff_quotients",
    "slab_index",
    "eval_interpolant",
    "eval_on_slab",
]

KINDS = ("forth_constant", "back_constant", "piecewise_linear", "piecewise_quadratic")
_ALIASES = {"bar": "forth_constant", "under": "back_constant", "hat": "piecewise_linear", "tilde": "piecewise_quadratic"}


def extend_ghost(levels) -> np.ndarray:
    z = np.asarray(levels, dtype=float)
    if z.shape[0] < 3:
        raise ValueError("need at least 3 levels (N >= 2)")
    return np.concatenate([z, (2.0 * z[-1] - z[-2])[None]], axis=0)


def diff_quotients(levels, tau: float):
    """(dz_0..dz_N, d2z_0..d2z_{N-1}) using the ghost level."""
    zg = extend_ghost(levels)
    dz = np.diff(zg, axis=0) / tau
    d2z = np.diff(dz, axis=0) / tau
    return dz, d2z


def slab_index(t, tau: float, N: int) -> np.ndarray:
    """Slab n in 1..N containing t, with t = n tau assigned to slab n (and t = 0 to slab 1)."""
    k = np.asarray(t, dtype=float) / tau
    r = np.round(k)
    k = np.where(np.abs(k - r) <= 1e-10 * np.maximum(1.0, np.abs(k)), r, k)
    return np.clip(np.ceil(k), 1, N).astype(int)


@dataclass
class Interpolant:
    kind: str
    levels: np.ndarray
    tau: float

    def __post_init__(self):
        self.kind = _ALIASES.get(self.kind, self.kind)
        if self.kind not in KINDS:
            raise ValueError(f"unknown interpolant kind {self.kind!r}")
        self.levels = np.asarray(self.levels, dtype=float)
        self.dz, self.d2z = diff_quotients(self.levels, self.tau)
        if self.kind == "piecewise_quadratic":
            # knot values of tilde: trapezoid rule on the piecewise-linear derivative
            inc = 0.5 * self.tau * (self.dz[:-1] + self.dz[1:])
            self._knots = np.concatenate([self.levels[:1], self.levels[:1] + np.cumsum(inc, axis=0)], axis=0)

    @property
    def N(self) -> int:
        return self.levels.shape[0] - 1

    @property
    def T(self) -> float:
        return self.N * self.tau

    def __call__(self, t, deriv: int = 0):
        return eval_interpolant(self, t, deriv)


def eval_interpolant(interp: Interpolant, t, deriv: int = 0):
    """Value (or time derivative of order ``deriv``) at t in [0, T].

    Scalar t returns one level-shaped array; array t stacks along axis 0.
    """
    t_arr = np.asarray(t, dtype=float)
    T = interp.T
    if np.any(t_arr < -1e-12 * T) or np.any(t_arr > T * (1 + 1e-12)):
        raise ValueError(f"t outside [0, {T}]")
    n = slab_index(t_arr, interp.tau, interp.N)
    s = np.clip(t_arr - (n - 1) * interp.tau, 0.0, interp.tau)
    return eval_on_slab(interp, n, s, deriv)


def eval_on_slab(interp: Interpolant, n, s, deriv: int = 0):
    """Evaluate the slab-n polynomial at local time s in [0, tau].

    Unlike :func:`eval_interpolant` this reaches the one-sided limits of the
    piecewise-constant interpolants at the slab ends.
    """
    n = np.asarray(n, dtype=int)
    s = np.asarray(s, dtype=float)
    z, dz, d2z = interp.levels, interp.dz, interp.d2z
    s = s.reshape(s.shape + (1,) * (z.ndim - 1))
    k = interp.kind
    zero = np.zeros_like(z[n])
    if k in ("forth_constant", "back_constant"):
        if deriv:
            return zero
        return z[n] + 0.0 * s if k == "forth_constant" else z[n - 1] + 0.0 * s
    if k == "piecewise_linear":
        if deriv == 0:
            return z[n - 1] + s * dz[n - 1]
        if deriv == 1:
            return dz[n - 1] + 0.0 * s
        return zero
    if deriv == 0:
        return interp._knots[n - 1] + s * dz[n - 1] + 0.5 * s * s * d2z[n - 1]
    if deriv == 1:
        return dz[n - 1] + s * d2z[n - 1]
    if deriv == 2:
        return d2z[n - 1] + 0.0 * s
    return zero
