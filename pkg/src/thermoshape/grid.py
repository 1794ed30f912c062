"""Uniform structured grids on boxes in 1D/2D with homogeneous Neumann operators.

Scalar fields are plain ``numpy`` arrays of shape ``grid.shape`` (axis 0 is x).
Fluxes such as the stress live on cell edges: an *edge field* is a tuple with one
array per axis, the array for axis ``a`` having ``nodes[a] - 1`` entries along
that axis.  With trapezoidal node weights ``M`` and edge weights ``W``, the
mirror-reflected five-point Laplacian factorises as

    lap(f) = -M^{-1} D^T W D f,

where ``D`` is the forward difference onto edges.  Everything that needs a
discrete integration by parts (weak forms, energy tests) goes through ``D``
and :func:`divergence`, so the identities hold to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridMismatch",
    "SolverError",
    "laplacian_neumann",
    "edge_gradient",
    "divergence",
    "edge_average",
    "edges_to_nodes",
    "grad",
    "grad_along",
    "inner",
    "edge_inner",
    "integrate",
    "norm",
    "boundary_pairing",
    "solve_helmholtz",
    "HelmholtzInfo",
]


class GridMismatch(ValueError):
    """A field does not live on the grid it was paired with."""


class SolverError(RuntimeError):
    """An iterative solve stopped before meeting its contract."""

    def __init__(self, message: str, residual: float | None = None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


@dataclass(frozen=True)
class Grid:
    """Tensor-product node grid on ``[0, L_1] x ... x [0, L_d]``.

    Args:
        dim: 1 or 2.
        extents: box side lengths, one per axis.
        nodes: node count per axis (at least 3).
    """

    dim: int
    extents: tuple[float, ...]
    nodes: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        ext = tuple(float(x) for x in self.extents)
        nod = tuple(int(n) for n in self.nodes)
        if len(ext) != self.dim or len(nod) != self.dim:
            raise ValueError(f"extents and nodes need {self.dim} entries, got {ext} and {nod}")
        if any(x <= 0 for x in ext):
            raise ValueError(f"extents must be positive, got {ext}")
        if any(n < 3 for n in nod):
            raise ValueError(f"need at least 3 nodes per axis, got {nod}")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "nodes", nod)
        object.__setattr__(self, "spacing", tuple(L / (n - 1) for L, n in zip(ext, nod)))

    @classmethod
    def uniform(cls, nodes: int | Sequence[int], extents: float | Sequence[float] = 1.0) -> "Grid":
        if np.isscalar(nodes):
            nodes = (int(nodes),)
        nodes = tuple(nodes)
        if np.isscalar(extents):
            extents = (float(extents),) * len(nodes)
        return cls(len(nodes), tuple(extents), nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.extents[axis], self.nodes[axis])

    def coords(self) -> tuple[np.ndarray, ...]:
        """Nodal coordinate arrays, each of shape ``self.shape``."""
        return tuple(np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij"))

    def edge_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.nodes)
        s[axis] -= 1
        return tuple(s)

    # Quadrature weights are cached on first use; the dataclass is frozen so the
    # cache lives in ``__dict__`` directly.
    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal node weights (the lumped mass)."""
        w = self.__dict__.get("_weights")
        if w is None:
            w = _outer([_trapezoid_1d(n, h) for n, h in zip(self.nodes, self.spacing)])
            w.setflags(write=False)
            self.__dict__["_weights"] = w
        return w

    def edge_weights(self, axis: int) -> np.ndarray:
        """Weights of the axis-``axis`` edges: ``h_axis`` times the trapezoid rule across."""
        key = f"_edge_weights_{axis}"
        w = self.__dict__.get(key)
        if w is None:
            factors = []
            for a, (n, h) in enumerate(zip(self.nodes, self.spacing)):
                factors.append(np.full(n - 1, h) if a == axis else _trapezoid_1d(n, h))
            w = _outer(factors)
            w.setflags(write=False)
            self.__dict__[key] = w
        return w

    @property
    def boundary_weights(self) -> np.ndarray:
        """Boundary quadrature weights on the node array (zero in the interior).

        In 1D these are point evaluations at both ends.  In 2D each boundary
        node carries half the length of every boundary segment touching it.
        """
        w = self.__dict__.get("_boundary_weights")
        if w is None:
            if self.dim == 1:
                w = np.zeros(self.nodes)
                w[0] = w[-1] = 1.0
            else:
                (nx, ny), (hx, hy) = self.nodes, self.spacing
                w = np.zeros(self.nodes)
                tx = _trapezoid_1d(nx, hx)
                ty = _trapezoid_1d(ny, hy)
                w[:, 0] += tx
                w[:, -1] += tx
                w[0, :] += ty
                w[-1, :] += ty
            w.setflags(write=False)
            self.__dict__["_boundary_weights"] = w
        return w

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatch(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_edges(self, q, name: str = "edge field") -> tuple[np.ndarray, ...]:
        if len(q) != self.dim:
            raise GridMismatch(f"{name} has {len(q)} components, grid dim is {self.dim}")
        out = []
        for a, qa in enumerate(q):
            qa = np.asarray(qa, dtype=float)
            if qa.shape != self.edge_shape(a):
                raise GridMismatch(f"{name}[{a}] has shape {qa.shape}, expected {self.edge_shape(a)}")
            out.append(qa)
        return tuple(out)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "extents": list(self.extents), "nodes": list(self.nodes)}


def _trapezoid_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _outer(factors: list[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return np.array(out, dtype=float)


# ---------------------------------------------------------------------------
# staggered operators


def edge_gradient(g: Grid, f: np.ndarray) -> tuple[np.ndarray, ...]:
    """Forward differences of nodal ``f`` onto the edges of each axis."""
    f = g.check(f)
    return tuple(np.diff(f, axis=a) / g.spacing[a] for a in range(g.dim))


def _adjoint_diff(g: Grid, fluxes) -> np.ndarray:
    """``sum_a D_a^T fluxes_a`` on the node array (no weights applied)."""
    out = np.zeros(g.shape)
    for a, q in enumerate(fluxes):
        h = g.spacing[a]
        qa = np.moveaxis(q, a, 0)
        oa = np.moveaxis(out, a, 0)
        oa[:-1] -= qa / h
        oa[1:] += qa / h
    return out


def divergence(g: Grid, q) -> np.ndarray:
    """Discrete divergence ``-M^{-1} sum_a D_a^T W_a q_a`` of an edge field.

    It is the negative adjoint of :func:`edge_gradient`:
    ``inner(g, v, divergence(g, q)) == -edge_inner(g, edge_gradient(g, v), q)``.
    """
    q = g.check_edges(q)
    weighted = [g.edge_weights(a) * q[a] for a in range(g.dim)]
    return -_adjoint_diff(g, weighted) / g.weights


def laplacian_neumann(g: Grid, f: np.ndarray) -> np.ndarray:
    """Second-order Laplacian with mirror-reflected (zero normal derivative) boundary rows."""
    return divergence(g, edge_gradient(g, f))


def edge_average(g: Grid, f: np.ndarray) -> tuple[np.ndarray, ...]:
    """Arithmetic mean of the two end nodes of every edge."""
    f = g.check(f)
    out = []
    for a in range(g.dim):
        fa = np.moveaxis(f, a, 0)
        out.append(np.moveaxis(0.5 * (fa[1:] + fa[:-1]), 0, a))
    return tuple(out)


def edges_to_nodes(g: Grid, q) -> np.ndarray:
    """Weighted adjoint of :func:`edge_average`, summed over axes.

    For a single-axis edge field this is the nodal average of the adjacent edge
    values; ``inner(g, edges_to_nodes(g, q), v) == edge_inner(g, q, edge_average(g, v))``
    for every component.  With one component per axis it returns the sum, which
    is what ``sigma . e`` needs once each component has been scaled by ``e_a``.
    """
    q = g.check_edges(q)
    out = np.zeros(g.shape)
    for a in range(g.dim):
        wq = np.moveaxis(g.edge_weights(a) * q[a], a, 0)
        oa = np.moveaxis(out, a, 0)
        oa[:-1] += 0.5 * wq
        oa[1:] += 0.5 * wq
    return out / g.weights


def grad(g: Grid, f: np.ndarray) -> np.ndarray:
    """Nodal gradient, shape ``(dim,) + grid.shape``.

    Centered differences inside, second-order one-sided at the boundary.
    """
    f = g.check(f)
    if g.dim == 1:
        return np.gradient(f, g.spacing[0], edge_order=2)[None, ...]
    return np.stack(np.gradient(f, *g.spacing, edge_order=2))


def grad_along(g: Grid, f: np.ndarray, e: Sequence[float]) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.shape != (g.dim,):
        raise GridMismatch(f"direction has shape {e.shape}, grid dim is {g.dim}")
    return np.tensordot(e, grad(g, f), axes=1)


# ---------------------------------------------------------------------------
# quadrature and norms


def integrate(g: Grid, f: np.ndarray) -> float:
    return float(np.sum(g.weights * g.check(f)))


def inner(g: Grid, f: np.ndarray, h: np.ndarray) -> float:
    return float(np.sum(g.weights * g.check(f) * g.check(h)))


def edge_inner(g: Grid, p, q) -> float:
    p = g.check_edges(p)
    q = g.check_edges(q)
    return float(sum(np.sum(g.edge_weights(a) * p[a] * q[a]) for a in range(g.dim)))


def norm(g: Grid, f: np.ndarray, kind: str = "L2", q: float = 2.0) -> float:
    """Discrete norms with trapezoidal quadrature.

    ``kind`` is one of ``L1, L2, Linf, Lq, H1semi, W1q_semi``; ``q`` is read
    for the last-but-one and last.  Gradient seminorms use the edge
    differences, so ``norm(g, f, "H1semi")**2 == -inner(g, laplacian_neumann(g, f), f)``.
    The ``W1q_semi`` integrand is ``sum_a |D_a f|^q``, which is the Euclidean
    form in 1D and for ``q = 2``.
    """
    f = g.check(f)
    if kind == "L1":
        return float(np.sum(g.weights * np.abs(f)))
    if kind == "L2":
        return float(np.sqrt(np.sum(g.weights * f * f)))
    if kind == "Linf":
        return float(np.max(np.abs(f)))
    if kind == "Lq":
        return float(np.sum(g.weights * np.abs(f) ** q) ** (1.0 / q))
    if kind == "H1semi":
        d = edge_gradient(g, f)
        return float(np.sqrt(sum(np.sum(g.edge_weights(a) * d[a] ** 2) for a in range(g.dim))))
    if kind == "W1q_semi":
        d = edge_gradient(g, f)
        return float(sum(np.sum(g.edge_weights(a) * np.abs(d[a]) ** q) for a in range(g.dim)) ** (1.0 / q))
    raise ValueError(f"unknown norm kind {kind!r}")


def boundary_pairing(g: Grid, b, v: np.ndarray) -> float:
    """``int_Gamma b v`` by boundary trapezoid; in 1D ``b(0) v(0) + b(L) v(L)``.

    ``b`` may be a scalar, a node array (only boundary entries matter), or in
    1D a pair ``(b_left, b_right)``.
    """
    v = g.check(v)
    return float(np.sum(g.boundary_weights * boundary_values(g, b) * v))


def boundary_values(g: Grid, b) -> np.ndarray:
    """Expand boundary data to a node array (interior entries are ignored)."""
    if np.isscalar(b):
        return g.full(b)
    b = np.asarray(b, dtype=float)
    if g.dim == 1 and b.shape == (2,):
        out = np.zeros(g.shape)
        out[0], out[-1] = b
        return out
    return g.check(b, "boundary data")


# ---------------------------------------------------------------------------
# Helmholtz solve


@dataclass
class HelmholtzInfo:
    iterations: int
    residual: float
    history: list[float]


def _stiffness_apply(g: Grid, x: np.ndarray) -> np.ndarray:
    d = edge_gradient(g, x)
    return _adjoint_diff(g, [g.edge_weights(a) * d[a] for a in range(g.dim)])


def _stiffness_diag(g: Grid) -> np.ndarray:
    out = np.zeros(g.shape)
    for a in range(g.dim):
        w = np.moveaxis(g.edge_weights(a) / g.spacing[a] ** 2, a, 0)
        oa = np.moveaxis(out, a, 0)
        oa[:-1] += w
        oa[1:] += w
    return out


def solve_helmholtz(
    g: Grid,
    a,
    b: float,
    rhs: np.ndarray,
    tol: float = 1e-10,
    x0: np.ndarray | None = None,
    maxiter: int | None = None,
    full_output: bool = False,
):
    """Solve ``a*x - b*lap(x) = rhs`` with Jacobi-preconditioned conjugate gradients.

    The system is symmetrised by the lumped mass, ``(M a + b K) x = M rhs`` with
    ``K = D^T W D``, and iterated until the nodal residual satisfies
    ``||a*x - b*lap(x) - rhs||_2 <= tol * ||rhs||_2``.

    Raises:
        ValueError: if ``a`` is not strictly positive or ``b`` is negative.
        SolverError: if the cap of ``50 * grid.size`` iterations is hit.
    """
    rhs = g.check(rhs, "rhs")
    a_arr = np.broadcast_to(np.asarray(a, dtype=float), g.shape)
    if not np.all(a_arr > 0.0):
        raise ValueError(f"coefficient a must be positive, min is {float(np.min(a_arr))}")
    if b < 0.0:
        raise ValueError(f"coefficient b must be nonnegative, got {b}")
    if maxiter is None:
        maxiter = 50 * g.size

    Mw = g.weights
    Ma = Mw * a_arr
    diag = Ma + b * _stiffness_diag(g)

    def apply(x):
        return Ma * x + b * _stiffness_apply(g, x)

    target = tol * float(np.linalg.norm(rhs))
    x = np.zeros(g.shape) if x0 is None else np.array(g.check(x0, "x0"), dtype=float)
    r = Mw * rhs - apply(x)
    res = float(np.linalg.norm(r / Mw))
    history = [res]
    it = 0
    if res > target:
        z = r / diag
        p = z.copy()
        rz = float(np.sum(r * z))
        while True:
            Ap = apply(p)
            alpha = rz / float(np.sum(p * Ap))
            x += alpha * p
            r -= alpha * Ap
            it += 1
            res = float(np.linalg.norm(r / Mw))
            history.append(res)
            if res <= target:
                break
            if it >= maxiter:
                raise SolverError(
                    f"CG hit the iteration cap ({maxiter}) with residual {res:.3e} > {target:.3e}",
                    residual=res,
                    history=history,
                )
            z = r / diag
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
    if full_output:
        return x, HelmholtzInfo(it, res, history)
    return x
